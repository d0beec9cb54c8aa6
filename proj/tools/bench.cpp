// Benchmark comparing the OpenMP kernels against the serial references,
// plus a batch-forward timing at training shapes.

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "glossalign/data.hpp"
#include "glossalign/kernels.hpp"
#include "glossalign/model.hpp"
#include "glossalign/rng.hpp"

using namespace glossalign;

namespace {

double now_secs() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = 2.0 * rng.next_double() - 1.0;
  return m;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e100;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_secs();
    f();
    best = std::min(best, now_secs() - t0);
  }
  return best;
}

volatile double g_sink = 0.0;

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 512;
  if (argc > 1) n = static_cast<std::size_t>(std::stoul(argv[1]));

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("threads: %d\n", threads);

  Rng rng(7);
  const Matrix a = random_matrix(rng, n, n);
  const Matrix b = random_matrix(rng, n, n);

  const double t_serial = time_best_of(3, [&] { g_sink = kernels::serial::matmul(a, b)(0, 0); });
  const double t_omp = time_best_of(3, [&] { g_sink = kernels::matmul(a, b)(0, 0); });
  std::printf("matmul %zux%zu          serial %8.4fs   omp %8.4fs   speedup %.2fx\n", n, n,
              t_serial, t_omp, t_serial / t_omp);

  const Matrix s = random_matrix(rng, n, n);
  const double sm_serial =
      time_best_of(5, [&] { g_sink = kernels::serial::softmax_rows(s)(0, 0); });
  const double sm_omp = time_best_of(5, [&] { g_sink = kernels::softmax_rows(s)(0, 0); });
  std::printf("softmax_rows %zux%zu    serial %8.4fs   omp %8.4fs   speedup %.2fx\n", n, n,
              sm_serial, sm_omp, sm_serial / sm_omp);

  const Matrix c = random_matrix(rng, n, 64);
  const double cs_serial =
      time_best_of(3, [&] { g_sink = kernels::serial::cosine_sim_matrix(c, c)(0, 0); });
  const double cs_omp = time_best_of(3, [&] { g_sink = kernels::cosine_sim_matrix(c, c)(0, 0); });
  std::printf("cosine_sim %zux64       serial %8.4fs   omp %8.4fs   speedup %.2fx\n", n, cs_serial,
              cs_omp, cs_serial / cs_omp);

  // batch of context forwards at the synthetic training shape
  SynthConfig synth;
  synth.n_synsets = 8;
  synth.words_per_synset = 2;
  synth.contexts_per_word = 16;
  SynthResult data = synth_generate(synth);
  HeadConfig head;
  head.d_h = synth.d_h;
  head.d_model = synth.d_g;
  const ContextHeadParams params = init_params(head, 3);

  auto forward_all = [&](bool parallel) {
    const std::int64_t count = static_cast<std::int64_t>(data.corpus.instances.size());
    double acc = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : acc) if (parallel)
    for (std::int64_t i = 0; i < count; ++i) {
      const ContextInstance& inst = data.corpus.instances[static_cast<std::size_t>(i)];
      acc += context_forward(inst.h_c, inst.span, params, DropoutState::eval())[0];
    }
    g_sink = acc;
  };
  const double fw_serial = time_best_of(3, [&] { forward_all(false); });
  const double fw_omp = time_best_of(3, [&] { forward_all(true); });
  std::printf("context_forward x%-5zu serial %8.4fs   omp %8.4fs   speedup %.2fx\n",
              data.corpus.instances.size(), fw_serial, fw_omp, fw_serial / fw_omp);
  return 0;
}
