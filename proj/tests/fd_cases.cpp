#include "fd_check.hpp"

namespace dbrn_test {

namespace {

double positive_init(dbrn::CounterRng& rng, std::size_t) {
  return 0.5 + std::abs(rng.next_gaussian());
}

// keeps |e| clear of the smooth-l1 kink at beta
double offset_init(dbrn::CounterRng& rng, std::size_t idx) {
  const double g = rng.next_gaussian();
  return idx == 0 ? g : g + 4.0;
}

}  // namespace

std::vector<FdCase> autodiff_fd_cases() {
  using ag::Tensor;
  std::vector<FdCase> cases;

  cases.push_back({"add_bcast",
                   {{2, 3, 4}, {3, 1}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::add(in[0], in[1]), 1);
                   },
                   nullptr});
  cases.push_back({"sub",
                   {{3, 4}, {3, 4}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::sub(in[0], in[1]), 2);
                   },
                   nullptr});
  cases.push_back({"mul_bcast",
                   {{2, 5}, {1, 5}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::mul(in[0], in[1]), 3);
                   },
                   nullptr});
  cases.push_back({"div",
                   {{4, 3}, {4, 1}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::div(in[0], in[1]), 4);
                   },
                   positive_init});
  cases.push_back({"scale_addconst",
                   {{6}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::add_const(ag::scale(in[0], -1.7), 0.3), 5);
                   },
                   nullptr});
  cases.push_back({"exp",
                   {{5}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::exp(in[0]), 6);
                   },
                   nullptr});
  cases.push_back({"log",
                   {{5}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::log(in[0]), 7);
                   },
                   positive_init});
  cases.push_back({"softplus",
                   {{7}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::softplus(in[0]), 8);
                   },
                   nullptr});
  cases.push_back({"gelu",
                   {{7}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::gelu(in[0]), 9);
                   },
                   nullptr});
  cases.push_back({"matmul",
                   {{3, 4}, {4, 2}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::matmul(in[0], in[1]), 10);
                   },
                   nullptr});
  cases.push_back({"transpose",
                   {{3, 5}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::transpose(in[0]), 11);
                   },
                   nullptr});
  cases.push_back({"reshape",
                   {{2, 6}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::reshape(in[0], {3, 2, 2}), 12);
                   },
                   nullptr});
  cases.push_back({"slice",
                   {{3, 6}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::slice(in[0], 1, 2, 3), 13);
                   },
                   nullptr});
  cases.push_back({"concat",
                   {{2, 3}, {2, 2}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::concat({in[0], in[1]}, 1), 14);
                   },
                   nullptr});
  cases.push_back({"softmax",
                   {{3, 5}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::softmax(in[0], 1), 15);
                   },
                   nullptr});
  cases.push_back({"layer_norm",
                   {{4, 6}, {6}, {6}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::layer_norm(in[0], in[1], in[2]), 16);
                   },
                   nullptr});
  cases.push_back({"group_norm",
                   {{2, 6, 4}, {6}, {6}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::group_norm(in[0], 3, in[1], in[2]), 17);
                   },
                   nullptr});
  cases.push_back({"conv1d",
                   {{2, 3, 10}, {4, 3, 5}, {4}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::conv1d(in[0], in[1], in[2], 2, 2), 18);
                   },
                   nullptr});
  cases.push_back({"sum_mean",
                   {{3, 4}},
                   [](const std::vector<Tensor>& in) {
                     return ag::add(ag::mean_all(in[0]), ag::sum_all(in[0]));
                   },
                   nullptr});
  cases.push_back({"sum_axis",
                   {{3, 4, 2}},
                   [](const std::vector<Tensor>& in) {
                     return fd_scalarize(ag::sum_axis(in[0], 1), 19);
                   },
                   nullptr});
  cases.push_back({"smooth_l1",
                   {{3, 4}, {3, 4}},
                   [](const std::vector<Tensor>& in) {
                     return ag::smooth_l1(in[0], in[1], 1.0);
                   },
                   offset_init});
  cases.push_back(
      {"smooth_l1_masked",
       {{2, 3, 4}, {2, 3, 4}},
       [](const std::vector<Tensor>& in) {
         const auto mask = ag::constant({2, 3, 1}, {1, 0, 1, 1, 0, 0});
         return ag::smooth_l1(in[0], in[1], 1.0, mask);
       },
       offset_init});
  cases.push_back({"cross_entropy",
                   {{4, 3}},
                   [](const std::vector<Tensor>& in) {
                     return ag::cross_entropy(in[0], {0, 2, 1, 2});
                   },
                   nullptr});
  return cases;
}

}  // namespace dbrn_test
