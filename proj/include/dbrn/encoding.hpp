#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbrn/autodiff.hpp"
#include "dbrn/signal_io.hpp"

namespace dbrn {

// Learnable conduction-kernel scale plus the coordinate projection. The decay
// scale is tau = softplus(alpha) + eps, strictly positive by construction.
struct ChannelPeParams {
  ag::Tensor alpha;   // [1]
  ag::Tensor proj_w;  // [3, D]
  ag::Tensor proj_b;  // [D]
  double eps = 1e-6;

  // alpha such that softplus(alpha) + eps equals the given scale (8 cm default,
  // a typical inter-electrode distance).
  static double alpha_for_scale(double tau_m, double eps = 1e-6);
};

// Fixed slow-oscillation frequencies (log-spaced over [0.01, 0.5] Hz) and decay
// rates (time constants log-spaced over [1, 100] s); only the projection learns.
struct TemporalBasis {
  std::vector<double> freqs_hz;      // K entries
  std::vector<double> decay_rates;   // M entries, d = 1/tau
  ag::Tensor proj_w;                 // [2K + M, D]
  ag::Tensor proj_b;                 // [D]

  static std::vector<double> log_spaced_freqs(std::size_t k);
  static std::vector<double> log_spaced_decays(std::size_t m);
  std::size_t dim() const { return 2 * freqs_hz.size() + decay_rates.size(); }
};

// D_ij = ||p_i - p_j||, row-major C x C, meters. Missing labels are an error.
std::vector<double> pairwise_distances(const Montage& montage,
                                       const std::vector<std::string>& order);

// Row-normalized exp(-D/tau); differentiable through alpha.
ag::Tensor conduction_kernel(const std::vector<double>& distances, std::size_t c,
                             const ChannelPeParams& params);

// Kernel-smoothed coordinates projected to D: [C, D].
ag::Tensor channel_pe(const Montage& montage, const std::vector<std::string>& order,
                      const ChannelPeParams& params);

// Oscillatory + decay basis over absolute seconds t = 1..S, projected to D: [S, D].
ag::Tensor temporal_pe(std::size_t seconds, const TemporalBasis& basis);

// Plain basis matrix (S x (2K+M)) for inspection dumps.
std::vector<double> temporal_basis_matrix(std::size_t seconds,
                                          const std::vector<double>& freqs_hz,
                                          const std::vector<double>& decay_rates);

// Ablation variants: raw-coordinate projection / classic sinusoidal encoding.
ag::Tensor ablation_channel_pe(const Montage& montage,
                               const std::vector<std::string>& order,
                               const ag::Tensor& proj_w, const ag::Tensor& proj_b);
ag::Tensor ablation_temporal_pe(std::size_t seconds, std::size_t dim);

}  // namespace dbrn
