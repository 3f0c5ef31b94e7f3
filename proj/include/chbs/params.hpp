// params.hpp -- model parameters: boundary coupling regime and nonlinearity.
#pragma once

#include "chbs/pair.hpp"
#include "chbs/potentials.hpp"

namespace chbs {

enum class Regularization { Exact, Yosida };

// Coupling matrix: either L > 0 with sigma > 0, or L = 0 with sigma >= 0.
// (L > 0 with sigma = 0 is outside the supported set; the infinite-L limit
// is not implemented.)
struct ModelParams {
  double L = 1.0;
  double sigma = 1.0;
  Regularization reg = Regularization::Exact;
  YosidaConfig yosida;  // used when reg == Yosida
  PotentialSpec potential;
};

// Throws RegimeError / ParamError on an inadmissible combination.
void validate_params(const ModelParams& p);

// Linkage of the chemical-potential pair in a given regime: independent
// surface unknown for L > 0, trace identification for L = 0.
inline Linkage mu_linkage(double L) {
  return L > 0.0 ? Linkage::Independent : Linkage::TraceLinked;
}

}  // namespace chbs
