#pragma once

#include <functional>

#include "fmse/backbone.hpp"
#include "fmse/objectives.hpp"

namespace fmse {

using VelocityFieldFn = std::function<CMatrix(const CMatrix& x, const CMatrix& y, double t)>;
using X1PredictorFn = std::function<CMatrix(const CMatrix& x, const CMatrix& y, double t)>;

/// Velocity-space and x1-space views of a backbone trained for `kind`.
/// The views hold a reference to `net`, which must outlive them.
struct ObjectiveHead {
  VelocityFieldFn velocity;
  X1PredictorFn x1;
};

ObjectiveHead wrap_objective_head(const Backbone& net, ObjectiveKind kind,
                                  const PrecondConfig& precond);

}  // namespace fmse
