#include "dbrn/encoding.hpp"

#include <cmath>
#include <numbers>

#include "dbrn/errors.hpp"

namespace dbrn {

double ChannelPeParams::alpha_for_scale(double tau_m, double eps) {
  if (!(tau_m > eps)) throw param_error("channel pe: scale must exceed eps");
  return std::log(std::expm1(tau_m - eps));  // softplus inverse
}

std::vector<double> TemporalBasis::log_spaced_freqs(std::size_t k) {
  if (k == 0) return {};
  std::vector<double> f(k);
  if (k == 1) {
    f[0] = 0.5;
    return f;
  }
  const double lo = std::log(0.01), hi = std::log(0.5);
  for (std::size_t i = 0; i < k; ++i)
    f[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                             static_cast<double>(k - 1));
  f.back() = 0.5;  // pin the endpoint exactly
  return f;
}

std::vector<double> TemporalBasis::log_spaced_decays(std::size_t m) {
  if (m == 0) return {};
  std::vector<double> d(m);
  if (m == 1) {
    d[0] = 1.0;
    return d;
  }
  const double lo = std::log(1.0), hi = std::log(100.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double tau = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                         static_cast<double>(m - 1));
    d[i] = 1.0 / tau;
  }
  return d;
}

std::vector<double> pairwise_distances(const Montage& montage,
                                       const std::vector<std::string>& order) {
  const std::size_t c = order.size();
  std::vector<std::array<double, 3>> pos(c);
  for (std::size_t i = 0; i < c; ++i) pos[i] = montage.position(order[i]);
  std::vector<double> d(c * c, 0.0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double dv = pos[i][k] - pos[j][k];
        acc += dv * dv;
      }
      const double dist = std::sqrt(acc);
      d[i * c + j] = dist;
      d[j * c + i] = dist;
    }
  return d;
}

ag::Tensor conduction_kernel(const std::vector<double>& distances, std::size_t c,
                             const ChannelPeParams& params) {
  if (distances.size() != c * c)
    throw param_error("conduction_kernel: distance matrix size mismatch");
  const ag::Tensor tau = ag::add_const(ag::softplus(params.alpha), params.eps);
  std::vector<double> neg(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) neg[i] = -distances[i];
  const ag::Tensor num =
      ag::exp(ag::div(ag::constant({c, c}, std::move(neg)), tau));
  const ag::Tensor row_sums = ag::sum_axis(num, 1);  // [c, 1]
  return ag::div(num, ag::add_const(row_sums, params.eps));
}

ag::Tensor channel_pe(const Montage& montage, const std::vector<std::string>& order,
                      const ChannelPeParams& params) {
  const std::size_t c = order.size();
  const ag::Tensor kernel =
      conduction_kernel(pairwise_distances(montage, order), c, params);
  std::vector<double> coords(c * 3);
  for (std::size_t i = 0; i < c; ++i) {
    const auto& p = montage.position(order[i]);
    for (int k = 0; k < 3; ++k) coords[i * 3 + k] = p[k];
  }
  const ag::Tensor smoothed =
      ag::matmul(kernel, ag::constant({c, 3}, std::move(coords)));
  return ag::add(ag::matmul(smoothed, params.proj_w), params.proj_b);
}

std::vector<double> temporal_basis_matrix(std::size_t seconds,
                                          const std::vector<double>& freqs_hz,
                                          const std::vector<double>& decay_rates) {
  const std::size_t k = freqs_hz.size(), m = decay_rates.size();
  const std::size_t dim = 2 * k + m;
  std::vector<double> basis(seconds * dim);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t s = 0; s < seconds; ++s) {
    const double t = static_cast<double>(s + 1);  // absolute seconds, 1-based
    double* row = basis.data() + s * dim;
    for (std::size_t i = 0; i < k; ++i) {
      row[2 * i] = std::sin(two_pi * freqs_hz[i] * t);
      row[2 * i + 1] = std::cos(two_pi * freqs_hz[i] * t);
    }
    for (std::size_t i = 0; i < m; ++i)
      row[2 * k + i] = std::exp(-decay_rates[i] * t);
  }
  return basis;
}

ag::Tensor temporal_pe(std::size_t seconds, const TemporalBasis& basis) {
  if (seconds == 0) throw param_error("temporal_pe: need at least one second");
  const std::size_t dim = basis.dim();
  const ag::Tensor b = ag::constant(
      {seconds, dim},
      temporal_basis_matrix(seconds, basis.freqs_hz, basis.decay_rates));
  return ag::add(ag::matmul(b, basis.proj_w), basis.proj_b);
}

ag::Tensor ablation_channel_pe(const Montage& montage,
                               const std::vector<std::string>& order,
                               const ag::Tensor& proj_w, const ag::Tensor& proj_b) {
  const std::size_t c = order.size();
  std::vector<double> coords(c * 3);
  for (std::size_t i = 0; i < c; ++i) {
    const auto& p = montage.position(order[i]);
    for (int k = 0; k < 3; ++k) coords[i * 3 + k] = p[k];
  }
  return ag::add(ag::matmul(ag::constant({c, 3}, std::move(coords)), proj_w),
                 proj_b);
}

ag::Tensor ablation_temporal_pe(std::size_t seconds, std::size_t dim) {
  // classic interleaved sin/cos over the 0-based index with 10^4 wavelengths
  std::vector<double> pe(seconds * dim);
  for (std::size_t t = 0; t < seconds; ++t)
    for (std::size_t i = 0; i < dim; ++i) {
      const double exponent =
          static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, exponent);
      pe[t * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return ag::constant({seconds, dim}, std::move(pe));
}

}  // namespace dbrn
