// Copyright 2026 The mbem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mbem/mixture_json.hpp"

#include <fstream>

#include "mbem/error.hpp"

namespace mbem {

nlohmann::json to_json(const MixtureParams& theta) {
  nlohmann::json j;
  j["family"] = std::string(to_string(theta.family()));
  j["weights"] = std::vector<double>(theta.weights().begin(), theta.weights().end());
  auto comps = nlohmann::json::array();
  for (Index z = 0; z < theta.size(); ++z) {
    if (theta.family() == Family::kGaussian) {
      const auto& c = theta.gaussian(z);
      auto cov = nlohmann::json::array();
      for (Index i = 0; i < c.covariance.rows(); ++i) {
        const Vector row = c.covariance.row(i).transpose();
        cov.push_back(std::vector<double>(row.begin(), row.end()));
      }
      comps.push_back({{"mean", std::vector<double>(c.mean.begin(), c.mean.end())},
                       {"covariance", std::move(cov)}});
    } else {
      comps.push_back({{"rate", theta.rate(z)}});
    }
  }
  j["components"] = std::move(comps);
  return j;
}

MixtureParams mixture_from_json(const nlohmann::json& j) {
  try {
    const Family family = family_from_string(j.value("family", std::string("gaussian")));
    const auto w = j.at("weights").get<std::vector<double>>();
    Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
    std::vector<ComponentParams> comps;
    for (const auto& c : j.at("components")) {
      switch (family) {
        case Family::kGaussian: {
          const auto m = c.at("mean").get<std::vector<double>>();
          const auto rows = c.at("covariance").get<std::vector<std::vector<double>>>();
          const auto d = static_cast<Index>(m.size());
          Matrix cov(d, d);
          if (static_cast<Index>(rows.size()) != d) {
            throw Error(ErrorCode::kInvalidInput, "covariance row count != dimension");
          }
          for (Index i = 0; i < d; ++i) {
            if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != d) {
              throw Error(ErrorCode::kInvalidInput, "covariance is not square");
            }
            for (Index k = 0; k < d; ++k) cov(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
          }
          comps.emplace_back(GaussianComponent{
              Eigen::Map<const Vector>(m.data(), d), std::move(cov)});
          break;
        }
        case Family::kExponential:
          comps.emplace_back(ExponentialComponent{c.at("rate").get<double>()});
          break;
        case Family::kPoisson:
          comps.emplace_back(PoissonComponent{c.at("rate").get<double>()});
          break;
      }
    }
    return MixtureParams(std::move(weights), std::move(comps));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("mixture json: ") + e.what());
  }
}

MixtureParams read_mixture_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return mixture_from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

}  // namespace mbem
