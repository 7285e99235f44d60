#pragma once

#include <string>
#include <vector>

#include "midsg/autograd.hpp"
#include "midsg/errors.hpp"

namespace midsg::ag::detail {

// Gradient buffer of a parent that needs one, else nullptr.
inline std::vector<double>* grad_of(Node& out, std::size_t i) {
  Node* p = out.parents[i].get();
  if (!p || !p->requires_grad) return nullptr;
  return &p->ensure_grad();
}

inline const std::vector<double>& value_of(Node& out, std::size_t i) {
  return out.parents[i]->value;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      to_string(a.shape()) + " vs " +
                                      to_string(b.shape()));
}

inline void require_rank(const Tensor& a, int rank, const char* op) {
  require(a.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + to_string(a.shape()));
}

}  // namespace midsg::ag::detail
