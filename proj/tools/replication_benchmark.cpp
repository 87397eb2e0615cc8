// Compares the serial reference replication runner against the OpenMP path
// on a small regret-vs-T workload and checks the rows agree.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cmdp/bench.hpp"
#include "cmdp/opt.hpp"

using namespace cmdp;
using namespace cmdp::bench;

int main() {
  const Instance inst = make_experiment_instance(10, 10, 2, 2, 0.3);
  std::vector<double> m_true(10, 2.0);
  const double lambda = lambda_of(inst.transitions(), m_true).first;

  std::vector<ReplicationJob> jobs;
  for (int rep = 0; rep < 40; ++rep)
    for (const char* alg : {"alg-ce", "alg-ue"}) {
      ReplicationJob job;
      job.instance = &inst;
      job.kind = ExperimentKind::RegretVsT;
      job.algorithm = alg;
      job.T = 5000;
      job.lambda = lambda;
      job.m = 2;
      job.seed = derive_seed(99, ExperimentKind::RegretVsT, 5000, rep, alg);
      jobs.push_back(std::move(job));
    }

  const auto t0 = std::chrono::steady_clock::now();
  const auto serial = run_jobs_serial(jobs);
  const auto t1 = std::chrono::steady_clock::now();
  const auto parallel = run_jobs_parallel(jobs, 0);
  const auto t2 = std::chrono::steady_clock::now();

  const double serial_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  const double parallel_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();

  bool identical = serial.size() == parallel.size();
  for (std::size_t i = 0; identical && i < serial.size(); ++i)
    identical = csv_row(serial[i], false) == csv_row(parallel[i], false);

#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif
  std::printf("jobs:            %zu\n", jobs.size());
  std::printf("serial:          %.1f ms\n", serial_ms);
  std::printf("openmp (%2d thr): %.1f ms\n", threads, parallel_ms);
  std::printf("speedup:         %.2fx\n", serial_ms / parallel_ms);
  std::printf("rows identical:  %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
