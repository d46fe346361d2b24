#include "ralab/optim.hpp"

namespace ralab {

void rmsprop_step(ParamSet& params, const ParamSet& grads, RmsPropState& state, const RmsPropConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("rmsprop_step: parameter/gradient count mismatch");
  if (state.mean_square.empty())
    for (const Matrix& p : params) state.mean_square.push_back(Matrix::Zero(p.rows(), p.cols()));
  if (state.mean_square.size() != params.size()) throw ShapeError("rmsprop_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        state.mean_square[i].rows() != params[i].rows() || state.mean_square[i].cols() != params[i].cols())
      throw ShapeError("rmsprop_step: shape mismatch in block " + std::to_string(i));
    Matrix& s = state.mean_square[i];
    s = config.decay * s + (1.0 - config.decay) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= config.lr * grads[i].array() / (s.array() + config.eps).sqrt();
  }
}

}  // namespace ralab
