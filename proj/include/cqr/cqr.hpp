#ifndef CQR_CQR_HPP
#define CQR_CQR_HPP

#include "cqr/types.hpp"
#include "cqr/quantile.hpp"
#include "cqr/losses.hpp"
#include "cqr/regressors/interfaces.hpp"
#include "cqr/regressors/ridge.hpp"
#include "cqr/regressors/knn.hpp"
#include "cqr/regressors/linear_quantile.hpp"
#include "cqr/regressors/forest.hpp"
#include "cqr/regressors/mlp.hpp"
#include "cqr/conformal.hpp"
#include "cqr/datagen.hpp"
#include "cqr/engines.hpp"
#include "cqr/report.hpp"
#include "cqr/harness.hpp"

#endif  // CQR_CQR_HPP
