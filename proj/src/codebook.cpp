#include "vqknn/codebook.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace vqknn {

Codebook Codebook::random_unit(int m, int d, Rng& rng) {
  check(m >= 2, "Codebook: need at least two codes");
  check(d >= 1, "Codebook: dimension must be positive");
  Codebook cb;
  cb.codes = Mat(m, d);
  for (int i = 0; i < m; ++i) {
    Vec v(d);
    do {
      for (int j = 0; j < d; ++j) v(j) = rng.normal();
    } while (v.norm() < 1e-6);
    cb.codes.row(i) = v.transpose() / v.norm();
  }
  cb.log_temperature = 0.0;
  return cb;
}

void Codebook::validate() const {
  check(size() >= 2, "Codebook: need at least two codes");
  check(dim() >= 1, "Codebook: dimension must be positive");
  for (int i = 0; i < size(); ++i) {
    check(codes.row(i).norm() >= 1e-12, "Codebook: code vector " + std::to_string(i) + " is zero");
  }
  check(std::isfinite(log_temperature), "Codebook: log_temperature must be finite");
}

ProductCodebook ProductCodebook::random_unit(int groups, int m_per_group, int total_dim,
                                             Rng& rng) {
  check(groups >= 1, "ProductCodebook: need at least one group");
  check(total_dim % groups == 0,
        "ProductCodebook: total dimension must split evenly across groups");
  ProductCodebook pcb;
  const int dg = total_dim / groups;
  for (int g = 0; g < groups; ++g) pcb.groups.push_back(Codebook::random_unit(m_per_group, dg, rng));
  return pcb;
}

nlohmann::json codebook_to_json(const Codebook& cb) {
  nlohmann::json j;
  j["m"] = cb.size();
  j["d"] = cb.dim();
  j["log_temperature"] = cb.log_temperature;
  std::vector<Real> q;
  q.reserve(static_cast<std::size_t>(cb.codes.size()));
  for (int i = 0; i < cb.size(); ++i)
    for (int k = 0; k < cb.dim(); ++k) q.push_back(cb.codes(i, k));
  j["q"] = q;
  return j;
}

Codebook codebook_from_json(const nlohmann::json& j) {
  check(j.contains("m") && j.contains("d") && j.contains("q") && j.contains("log_temperature"),
        "codebook_from_json: missing field (need m, d, q, log_temperature)");
  const int m = j.at("m").get<int>();
  const int d = j.at("d").get<int>();
  const auto q = j.at("q").get<std::vector<Real>>();
  check(static_cast<int>(q.size()) == m * d, "codebook_from_json: q length does not equal m*d");
  Codebook cb;
  cb.codes = Mat(m, d);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) cb.codes(i, k) = q[static_cast<std::size_t>(i * d + k)];
  cb.log_temperature = j.at("log_temperature").get<Real>();
  cb.validate();
  return cb;
}

}  // namespace vqknn
