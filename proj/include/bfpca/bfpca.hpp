#pragma once

// Fully-Bayesian functional principal components analysis on an orthonormal
// spline basis: coefficient frames live on a Stiefel manifold, curvature
// penalties act through per-component smoothing precisions, and the prior
// mass admits a closed-form finite bound that the propriety module checks
// by Monte Carlo.

#include "bfpca/basis.hpp"
#include "bfpca/bspline.hpp"
#include "bfpca/errors.hpp"
#include "bfpca/io.hpp"
#include "bfpca/model.hpp"
#include "bfpca/penalty.hpp"
#include "bfpca/prior.hpp"
#include "bfpca/propriety.hpp"
#include "bfpca/quadrature.hpp"
#include "bfpca/rng.hpp"
#include "bfpca/sampler.hpp"
#include "bfpca/stiefel.hpp"
