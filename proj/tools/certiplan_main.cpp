// Copyright 2026 The certiplan Authors
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

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "certiplan/artifact.hpp"
#include "certiplan/runner.hpp"
#include "certiplan/scenario.hpp"

namespace {

void print_outcome(const char* tag, const certiplan::ExecutionTrace& trace,
                   const certiplan::ViolationStats& stats) {
  std::string finish = trace.finished_step
                           ? "finished at step " +
                                 std::to_string(*trace.finished_step)
                           : std::string(trace.aborted ? "aborted"
                                                       : "did not finish");
  std::printf("  %-9s %s, violations %d of %d segments (%.1f%%), max |u| %.4g\n",
              tag, finish.c_str(), stats.violating_segments,
              stats.total_segments, stats.percent, trace.max_input_norm);
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir) {
  const certiplan::Scenario scenario = certiplan::parse_scenario(
      certiplan::detail::read_text_file(scenario_path));
  const certiplan::RunArtifact art = certiplan::run_scenario(scenario, out_dir);

  std::printf("scenario %s: %zu agent(s)\n", scenario.name.c_str(),
              art.agents.size());
  bool any_aborted = false;
  for (size_t i = 0; i < art.agents.size(); ++i) {
    std::printf("agent %zu: path of %zu cells\n", i,
                art.agents[i].path.cells.size());
    print_outcome("certified", art.agents[i].trace, art.agents[i].stats);
    if (art.agents[i].baseline_trace)
      print_outcome("baseline", *art.agents[i].baseline_trace,
                    *art.agents[i].baseline_stats);
    any_aborted = any_aborted || art.agents[i].trace.aborted ||
                  (art.agents[i].baseline_trace &&
                   art.agents[i].baseline_trace->aborted);
  }
  double min_dist = -1.0;
  for (double d : art.min_pairwise)
    if (min_dist < 0.0 || d < min_dist) min_dist = d;
  if (min_dist >= 0.0)
    std::printf("min pairwise distance %.3f\n", min_dist);
  std::printf("artifacts written to %s\n", out_dir.c_str());
  return any_aborted ? 1 : 0;
}

int cmd_verify(const std::string& artifact) {
  const certiplan::LoadedPlan plan =
      certiplan::load_plan(certiplan::locate_plan(artifact));
  const certiplan::VerifyResult result = certiplan::verify_plan(plan);
  for (const certiplan::VerifyLine& line : result.lines) {
    const certiplan::VerificationReport& r = line.report;
    std::printf(
        "%-22s %s  contraction %.3e  facet slack %.3e  residuals %.3e %.3e "
        "%.3e\n",
        line.label.c_str(), r.pass ? "pass" : "FAIL", r.contraction_min_eig,
        r.facet_worst, r.residual_x0s_p, r.residual_x0g2, r.residual_u0g2);
  }
  std::printf("%zu certificate(s) checked, %d failure(s)\n",
              result.lines.size(), result.failures);
  return result.failures == 0 ? 0 : 1;
}

int cmd_render(const std::string& artifact, const std::string& kind) {
  const std::string out = certiplan::render_artifact(artifact, kind);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified grid planning and execution for linear agents"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  CLI::App* run = app.add_subcommand("run", "Plan and execute a scenario file");
  run->add_option("scenario", scenario_path, "Scenario file")->required();
  run->add_option("-o,--out", out_dir, "Output directory for artifacts")
      ->required();

  std::string verify_target;
  CLI::App* verify = app.add_subcommand(
      "verify", "Re-verify every certificate stored in a run artifact");
  verify->add_option("artifact", verify_target,
                     "Run directory or plan.json path")
      ->required();

  std::string render_target, kind;
  CLI::App* render =
      app.add_subcommand("render", "Render a figure from a run artifact");
  render->add_option("artifact", render_target,
                     "Run directory or plan.json path")
      ->required();
  render->add_option("--kind", kind, "Figure kind")
      ->required()
      ->check(CLI::IsMember({"trees", "ellipses", "paths", "executed"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir);
    if (verify->parsed()) return cmd_verify(verify_target);
    if (render->parsed()) return cmd_render(render_target, kind);
  } catch (const certiplan::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
