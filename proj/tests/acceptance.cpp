// Copyright 2026 The LDDG Authors. All Rights Reserved.
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

// Release gate: one line per criterion, nonzero exit if any fails.
// Usage: lddg_acceptance [criterion numbers...]

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include "criteria.hpp"

namespace {

struct Entry {
  int id;
  const char* name;
  std::function<lddg::gate::Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  namespace gate = lddg::gate;
  const auto scratch = std::filesystem::temp_directory_path() / "lddg_acceptance";
  const Entry entries[] = {
      {1, "rank-loss sub-gradient matches finite differences", [] { return gate::rank_subgradient(); }},
      {2, "SVD matches the Gram eigen-oracle", [] { return gate::svd_oracle(); }},
      {3, "KL closed form and gradients", [] { return gate::kl_correctness(); }},
      {4, "full-model gradient check", [] { return gate::model_gradient(); }},
      {5, "mixture KL alignment bound", [] { return gate::theorem1_suite(); }},
      {6, "target risk bound", [] { return gate::theorem2_suite(); }},
      {7, "noiseless latents have rank C", [] { return gate::assumption_construction(); }},
      {8, "ablation ordering", [] { return gate::ablation_direction(); }},
      {9, "rank sweep peaks near C", [] { return gate::rank_sweep_shape(); }},
      {10, "latent spectrum collapses to rank C", [] { return gate::spectrum_shape(); }},
      {11, "determinism and persistence", [&] { return gate::determinism_and_persistence(scratch); }},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& e : entries) {
    if (!only.empty() && !only.contains(e.id)) continue;
    gate::Verdict v;
    try {
      v = e.run();
    } catch (const std::exception& ex) {
      v = {false, std::string("exception: ") + ex.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << e.id << ". " << e.name << ": " << v.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
