#include "nqsens/costmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace nqsens::costmodel {

namespace {

void check(int n_sites, int width, int n_heads) {
  if (n_sites < 1 || width < 1 || n_heads < 1)
    throw std::invalid_argument("cost model arguments must be positive");
}

}  // namespace

long long trunk_flops(int n_sites, int width) {
  check(n_sites, width, 1);
  const long long n = n_sites, h = width;
  return n * h + h * h;
}

long long updated_params_single(int n_sites, int width, int n_heads) {
  check(n_sites, width, n_heads);
  const long long h = width;
  return trunk_flops(n_sites, width) + 2ll * n_heads * h;
}

long long updated_params_multi(int n_sites, int width, int n_heads) {
  check(n_sites, width, n_heads);
  const long long h = width;
  return n_heads * (trunk_flops(n_sites, width) + 2ll * h);
}

Real update_ratio(int n_sites, int width, int n_heads) {
  return static_cast<Real>(updated_params_single(n_sites, width, n_heads)) /
         static_cast<Real>(updated_params_multi(n_sites, width, n_heads));
}

Real cost_single(const CostInputs& in) {
  check(in.n_sites, in.width, in.n_heads);
  if (in.n_samples < 0) throw std::invalid_argument("sample count must be nonnegative");
  return static_cast<Real>(in.n_samples) *
         (3.0 * trunk_flops(in.n_sites, in.width) + 6.0 * in.n_heads * in.width);
}

Real cost_multi(const CostInputs& in) {
  check(in.n_sites, in.width, in.n_heads);
  if (in.n_samples < 0) throw std::invalid_argument("sample count must be nonnegative");
  return static_cast<Real>(in.n_samples) * in.n_heads *
         (3.0 * trunk_flops(in.n_sites, in.width) + 6.0 * in.width);
}

Real cost_penalty(const CostInputs& in) {
  check(in.n_sites, in.width, in.n_heads);
  if (in.n_samples < 0) throw std::invalid_argument("sample count must be nonnegative");
  return in.penalty_coeff * static_cast<Real>(in.n_samples) * in.n_heads * (in.n_heads - 1);
}

Real matched_width(int n_sites, int multi_width, int n_heads) {
  check(n_sites, multi_width, n_heads);
  const Real linear = static_cast<Real>(n_sites) + 2.0 * n_heads;
  const Real target = static_cast<Real>(updated_params_multi(n_sites, multi_width, n_heads));
  return 0.5 * (-linear + std::sqrt(linear * linear + 4.0 * target));
}

bool trunk_dominated(int n_sites, int width, int n_heads) {
  check(n_sites, width, n_heads);
  return 2 * n_heads < n_sites + width;
}

}  // namespace nqsens::costmodel
