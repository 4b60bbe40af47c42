#pragma once

#include <vector>

#include <Eigen/Core>

namespace ncpath {

/// True coefficient vector of a synthetic problem and its support S*.
struct GroundTruth {
  Eigen::VectorXd beta_star;
  std::vector<Eigen::Index> support;

  GroundTruth() = default;
  explicit GroundTruth(Eigen::VectorXd beta) : beta_star(std::move(beta)) {
    for (Eigen::Index j = 0; j < beta_star.size(); ++j) {
      if (beta_star[j] != 0.0) support.push_back(j);
    }
  }

  int s_star() const { return static_cast<int>(support.size()); }
};

}  // namespace ncpath
