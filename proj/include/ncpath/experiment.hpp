#pragma once

// Monte Carlo driver: per replication, generate a problem, run the requested
// methods, score them against the ground truth. Replications are independent
// and may run on several threads; results come back in replication order so
// the written tables do not depend on scheduling.

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ncpath/data_gen.hpp"
#include "ncpath/diagnostics.hpp"
#include "ncpath/io.hpp"
#include "ncpath/loss.hpp"
#include "ncpath/path.hpp"
#include "ncpath/robust_stats.hpp"
#include "ncpath/run_config.hpp"

namespace ncpath {

/// Loaded or generated data plus optional truth.
struct LoadedProblem {
  DesignData data;
  std::optional<GroundTruth> truth;
};

inline LoadedProblem load_problem(const RunConfig& rc, int replication = 0) {
  if (rc.data_file) {
    LoadedProblem p{io::read_design_csv(*rc.data_file, rc.response_column), std::nullopt};
    if (rc.truth_file) {
      p.truth = io::read_truth_csv(*rc.truth_file);
      if (p.truth->beta_star.size() != p.data.d()) {
        throw ConfigError("truth file length does not match the number of features");
      }
    }
    return p;
  }
  Problem g = gen_problem(rc.design.for_replication(static_cast<std::uint64_t>(replication)));
  return {std::move(g.data), std::move(g.truth)};
}

inline LossModel build_model(const RunConfig& rc, const DesignData& data) {
  switch (rc.loss) {
    case LossKind::LeastSquares: return LossModel::least_squares(data);
    case LossKind::Logistic: return LossModel::logistic(data);
    case LossKind::Elliptical: return LossModel::elliptical(elliptical_cov(stack_response(data), rc.catoni).cov);
  }
  throw ConfigError("unknown loss");
}

/// Path config with lambda_tgt resolved for this problem size.
inline PathConfig resolved_path_config(const RunConfig& rc, Eigen::Index n, Eigen::Index d) {
  PathConfig pc = rc.path;
  pc.lambda_tgt = rc.lambda_tgt_for(n, d);
  return pc;
}

struct MethodOutcome {
  Method method = Method::NcPath;
  bool ok = false;
  std::string error;
  RecoveryMetrics metrics;
  int nnz = 0;
  int iterations = 0;
  bool converged = true;
  double omega = 0.0;  ///< final-stage certificate (paths only)
  Vector beta;
  std::vector<TraceRecord> trace;
};

struct ReplicationResult {
  int replication = 0;
  double lambda0 = 0.0;
  double lambda_tgt = 0.0;
  int N = 0;
  std::string error;  ///< problem-level failure; methods are then empty
  std::vector<MethodOutcome> methods;

  bool failed() const {
    if (!error.empty()) return true;
    for (const auto& m : methods) {
      if (!m.ok) return true;
    }
    return false;
  }
};

inline ReplicationResult run_replication(const RunConfig& rc, int r, bool keep_traces) {
  ReplicationResult res;
  res.replication = r;
  try {
    const LoadedProblem prob = load_problem(rc, r);
    if (!prob.truth) throw ConfigError("experiment needs ground truth (generator design or truth file)");
    const GroundTruth& truth = *prob.truth;
    const LossModel model = build_model(rc, prob.data);
    const PathConfig pc = resolved_path_config(rc, prob.data.n(), prob.data.d());
    res.lambda_tgt = pc.lambda_tgt;
    res.lambda0 = lambda_zero(model);

    for (Method m : rc.methods) {
      MethodOutcome out;
      out.method = m;
      try {
        if (m == Method::Oracle) {
          out.beta = oracle_estimator(model, truth.support, pc.radius);
        } else {
          const PenaltySpec spec = m == Method::NcPath ? rc.penalty : PenaltySpec::l1();
          PathResult path = run_path(model, spec, pc, &truth.beta_star);
          res.N = path.schedule.N;
          out.beta = path.final_beta();
          out.iterations = path.total_iterations();
          out.converged = path.all_converged();
          out.omega = path.stages.back().result.omega;
          if (keep_traces) out.trace = path.trace();
        }
        out.metrics = recovery_metrics(out.beta, truth, rc.zero_tol);
        out.nnz = count_nonzeros(out.beta);
        out.ok = out.converged && std::isfinite(out.metrics.l2_error);
        if (!out.ok) out.error = "path did not converge";
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
      res.methods.push_back(std::move(out));
    }
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

/// Runs replications 0..reps-1 on `threads` workers; output in order.
inline std::vector<ReplicationResult> run_experiment(const RunConfig& rc, int reps, int threads) {
  std::vector<ReplicationResult> results(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) results[static_cast<std::size_t>(r)] = run_replication(rc, r, r == 0);
  };
  const int k = std::max(1, std::min(threads, reps));
  if (k == 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

// ---------------------------------------------------------------------------
// Aggregation: mean and standard error over successful replications.

struct Summary {
  int count = 0;
  double mean = 0.0;
  std::optional<double> se;  ///< undefined for a single value
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

struct MethodAggregate {
  Method method = Method::NcPath;
  int ok = 0;
  int failed = 0;
  Summary tps, fps, l2_error, exact_support, nnz, iterations;
};

inline std::vector<MethodAggregate> aggregate(const RunConfig& rc, const std::vector<ReplicationResult>& results) {
  std::vector<MethodAggregate> out;
  for (std::size_t k = 0; k < rc.methods.size(); ++k) {
    MethodAggregate a;
    a.method = rc.methods[k];
    std::vector<double> tps, fps, l2, ex, nnz, it;
    for (const auto& r : results) {
      if (!r.error.empty() || k >= r.methods.size() || !r.methods[k].ok) {
        ++a.failed;
        continue;
      }
      const auto& m = r.methods[k];
      ++a.ok;
      tps.push_back(m.metrics.tps);
      fps.push_back(m.metrics.fps);
      l2.push_back(m.metrics.l2_error);
      ex.push_back(m.metrics.exact_support ? 1.0 : 0.0);
      nnz.push_back(m.nnz);
      it.push_back(m.iterations);
    }
    a.tps = summarize(tps);
    a.fps = summarize(fps);
    a.l2_error = summarize(l2);
    a.exact_support = summarize(ex);
    a.nnz = summarize(nnz);
    a.iterations = summarize(it);
    out.push_back(a);
  }
  return out;
}

inline int failed_replications(const std::vector<ReplicationResult>& results) {
  int f = 0;
  for (const auto& r : results) f += r.failed() ? 1 : 0;
  return f;
}

/// More than 10% failed replications makes the run a failure.
inline bool too_many_failures(const std::vector<ReplicationResult>& results) {
  return 10 * failed_replications(results) > static_cast<int>(results.size());
}

// ---------------------------------------------------------------------------
// Tables.

inline void write_replications_csv(std::ostream& out, const std::vector<ReplicationResult>& results) {
  out << "rep,method,status,tps,fps,l2_error,exact_support,nnz,iterations,converged,omega,lambda0,lambda_tgt,N,error\n";
  auto clean = [](std::string s) {
    for (char& c : s) {
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    }
    return s;
  };
  for (const auto& r : results) {
    if (!r.error.empty()) {
      out << r.replication << ",,error,,,,,,,,,,,," << clean(r.error) << '\n';
      continue;
    }
    for (const auto& m : r.methods) {
      out << r.replication << ',' << to_string(m.method) << ',' << (m.ok ? "ok" : "failed") << ',';
      if (m.beta.size() > 0) {
        out << m.metrics.tps << ',' << m.metrics.fps << ',' << io::format_double(m.metrics.l2_error) << ','
            << (m.metrics.exact_support ? 1 : 0) << ',' << m.nnz << ',' << m.iterations << ','
            << (m.converged ? 1 : 0) << ',' << io::format_double(m.omega);
      } else {
        out << ",,,,,,,";
      }
      out << ',' << io::format_double(r.lambda0) << ',' << io::format_double(r.lambda_tgt) << ',' << r.N << ','
          << clean(m.error) << '\n';
    }
  }
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<MethodAggregate>& agg) {
  out << "method,ok,failed,tps_mean,tps_se,fps_mean,fps_se,l2_error_mean,l2_error_se,exact_support_rate,"
         "exact_support_se,nnz_mean,nnz_se,iterations_mean,iterations_se\n";
  auto put = [&](const Summary& s) {
    out << ',' << (s.count ? io::format_double(s.mean) : "") << ',';
    if (s.se) out << io::format_double(*s.se);
  };
  for (const auto& a : agg) {
    out << to_string(a.method) << ',' << a.ok << ',' << a.failed;
    put(a.tps);
    put(a.fps);
    put(a.l2_error);
    put(a.exact_support);
    put(a.nnz);
    put(a.iterations);
    out << '\n';
  }
}

}  // namespace ncpath
