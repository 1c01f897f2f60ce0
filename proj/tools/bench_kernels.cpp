#include <chrono>
#include <iostream>
#include <vector>

#include <omp.h>

#include "bnpc/bart.hpp"
#include "bnpc/kernels.hpp"
#include "bnpc/numerics.hpp"

namespace {

template <class Fn>
double best_ms(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double omp, bool identical) {
  std::cout << name << ": serial " << serial << " ms, openmp " << omp << " ms, speedup " << serial / omp
            << (identical ? ", outputs identical" : ", OUTPUTS DIFFER") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bnpc;
  const int n = argc > 1 ? std::atoi(argv[1]) : 1500;
  std::cout << "threads: " << omp_get_max_threads() << ", n = " << n << '\n';
  RngStream rng(42, 0);
  Eigen::MatrixXd x(n, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();

  Eigen::MatrixXd gs, go;
  const double ts = best_ms(3, [&] { gs = kernels::sq_exp_gram_serial(x, 0.7, 1.3); });
  const double to = best_ms(3, [&] { go = kernels::sq_exp_gram_omp(x, 0.7, 1.3); });
  report("sq_exp_gram", ts, to, gs == go);

  const CutGrid grid(x);
  std::vector<DecisionTree> trees;
  for (int t = 0; t < 200; ++t) trees.push_back(sample_prior_tree(grid, 0.95, 2.0, 0.1, rng));
  Eigen::MatrixXd q(20 * n, 5);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform();
  std::vector<double> ps, po;
  const double fs = best_ms(3, [&] { ps = kernels::forest_predict_serial(trees, q); });
  const double fo = best_ms(3, [&] { po = kernels::forest_predict_omp(trees, q); });
  report("forest_predict", fs, fo, ps == po);
  return (gs == go && ps == po) ? 0 : 1;
}
