#pragma once

// Direct summation of the density-aware convolution for one region, with
// every layer written as explicit loops over the stored weights.

#include <string>
#include <vector>

#include "oracles.hpp"

#include "dancenet/density.hpp"
#include "dancenet/diff/param_store.hpp"

namespace oracle {

using dancenet::diff::ParamStore;
using dancenet::diff::Tensor;

inline double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

inline std::vector<double> dconv(const ParamStore& s, const std::string& p, const std::vector<Vec3>& pts,
                                 const Tensor& f, std::size_t center, const std::vector<std::size_t>& members,
                                 double r, double h, bool use_density) {
  const std::size_t cin = f.cols() + 3;
  std::vector<double> acc(cin, 0.0);
  std::vector<Vec3> offs;
  for (std::size_t j : members) offs.push_back(pts[j] - pts[center]);
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::vector<double> u{offs[m].x / r, offs[m].y / r, offs[m].z / r};
    // kernel: 3 -> H (relu) -> cin
    std::vector<double> k1(s.value(p + ".kernel.w0").cols());
    for (std::size_t j = 0; j < k1.size(); ++j) {
      double a = s.value(p + ".kernel.b0")[j];
      for (std::size_t i = 0; i < 3; ++i) a += u[i] * s.value(p + ".kernel.w0").at(i, j);
      k1[j] = std::max(a, 0.0);
    }
    std::vector<double> k2(cin);
    for (std::size_t j = 0; j < cin; ++j) {
      double a = s.value(p + ".kernel.b1")[j];
      for (std::size_t i = 0; i < k1.size(); ++i) a += k1[i] * s.value(p + ".kernel.w1").at(i, j);
      k2[j] = a;
    }
    double scale = 1.0;
    if (use_density) {
      const double d = kde(offs, offs[m], h);
      double t = s.value(p + ".density.b1")[0];
      for (std::size_t q = 0; q < dancenet::kDensityHidden; ++q) {
        const double z = std::max(d * s.value(p + ".density.w0")[q] + s.value(p + ".density.b0")[q], 0.0);
        t += z * s.value(p + ".density.w1")[q];
      }
      scale = 1.0 / std::max(softplus(t), dancenet::kPositivityFloor);
    }
    for (std::size_t c = 0; c < cin; ++c) {
      const double pc = c < f.cols() ? f.at(members[m], c) : u[c - f.cols()];
      acc[c] += scale * k2[c] * pc;
    }
  }
  const Tensor& w = s.value(p + ".lift.w0");
  const Tensor& b = s.value(p + ".lift.b0");
  std::vector<double> out(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double a = b[j];
    for (std::size_t i = 0; i < cin; ++i) a += acc[i] * w.at(i, j);
    out[j] = std::max(a, 0.0);
  }
  return out;
}

}  // namespace oracle
