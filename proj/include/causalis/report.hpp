#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace causalis {

struct Residual {
  std::string name;
  double value = 0;
};

struct ResidualReport {
  std::vector<Residual> items;
  double min_eigenvalue = 0;
  bool passed = false;

  double worst() const {
    double w = 0;
    for (const auto &r : items)
      w = std::max(w, r.value);
    return w;
  }
  double value(const std::string &name) const {
    for (const auto &r : items)
      if (r.name == name)
        return r.value;
    return 0;
  }
};

inline constexpr double kResidualTol = 1e-9;

} // namespace causalis
