// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include <gtest/gtest.h>

#include "flowzero/bench.hpp"

namespace fz = flowzero;

namespace {

fz::RefineConfig local_cfg() {
  fz::RefineConfig cfg;
  cfg.feedback_mode = fz::FeedbackMode::kLocal;
  return cfg;
}

}  // namespace

TEST(GenCases, MovementCoversAllDirections) {
  const auto cases = fz::gen_cases(fz::Task::kMovement, 20, 7);
  ASSERT_EQ(cases.size(), 20u);
  std::set<fz::MotionLabel> seen;
  for (const auto& c : cases) {
    EXPECT_EQ(c.task(), fz::Task::kMovement);
    seen.insert(std::get<fz::MovementTarget>(c.expectation).label);
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(GenCases, Deterministic) {
  const auto a = fz::gen_cases(fz::Task::kMovement, 20, 7);
  const auto b = fz::gen_cases(fz::Task::kMovement, 20, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(fz::to_json(a[i]), fz::to_json(b[i]));
  EXPECT_NE(fz::to_json(fz::gen_cases(fz::Task::kMovement, 20, 8)[0]).dump(), fz::to_json(a[0]).dump());
}

TEST(GenCases, SizeSplitsGrowAndShrink) {
  std::set<fz::SizeTrend> seen;
  for (const auto& c : fz::gen_cases(fz::Task::kSize, 4, 0)) seen.insert(std::get<fz::SizeTarget>(c.expectation).trend);
  EXPECT_EQ(seen, (std::set<fz::SizeTrend>{fz::SizeTrend::kGrow, fz::SizeTrend::kShrink}));
}

TEST(GenCases, VisibilityAndObjects) {
  std::set<double> targets;
  for (const auto& c : fz::gen_cases(fz::Task::kVisibility, 6, 1)) {
    targets.insert(std::get<fz::VisibilityTarget>(c.expectation).fraction);
  }
  EXPECT_EQ(targets, (std::set<double>{0.25, 0.5}));
  for (const auto& c : fz::gen_cases(fz::Task::kObjects, 30, 2)) {
    const auto& names = std::get<fz::ObjectsTarget>(c.expectation).names;
    EXPECT_GE(names.size(), 2u);
    EXPECT_LE(names.size(), 4u);
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  }
  EXPECT_THROW(fz::gen_cases(fz::Task::kSize, 0, 0), fz::RangeError);
}

TEST(GenCases, PromptsRoundTripThroughKeywordInference) {
  for (fz::Task t : fz::kAllTasks) {
    for (const auto& c : fz::gen_cases(t, 12, 3)) {
      const auto dss = fz::reference_layout(c, 8);
      const auto inferred = fz::infer_case(c.prompt_text, dss);
      EXPECT_TRUE(inferred.expectation == c.expectation) << c.prompt_text;
    }
  }
}

TEST(ReferenceLayout, PassesEveryRuleAndEachInjectedErrorBreaksOne) {
  for (fz::Task t : fz::kAllTasks) {
    for (const auto& c : fz::gen_cases(t, 8, 5)) {
      const auto clean = fz::reference_layout(c, 8);
      EXPECT_TRUE(fz::score_case(c, clean).passed) << c.prompt_text;
      EXPECT_EQ(fz::local_feedback(clean, c).confidence, 5);
      const int k = fz::max_injectable_errors(c, 8);
      for (int v = 0; v < k; ++v) {
        auto broken = clean;
        fz::inject_error(broken, c, v);
        EXPECT_NO_THROW(fz::validate(broken));
        const auto checks = fz::rule_checks(broken, c);
        const auto failed = std::count_if(checks.begin(), checks.end(), [](const auto& r) { return !r.passed; });
        EXPECT_EQ(failed, 1) << c.prompt_text << " violation " << v;
      }
      const auto chain = fz::error_chain(c, 8, k);
      ASSERT_EQ(chain.size(), static_cast<std::size_t>(k + 1));
      for (std::size_t j = 0; j < chain.size(); ++j) {
        const auto checks = fz::rule_checks(chain[j], c);
        const auto failed = std::count_if(checks.begin(), checks.end(), [](const auto& r) { return !r.passed; });
        EXPECT_EQ(failed, k - static_cast<long>(j));
      }
    }
  }
}

TEST(ErrorSchedule, ExactShare) {
  const auto s = fz::error_schedule(20, 0.3, 9);
  EXPECT_EQ(std::count(s.begin(), s.end(), true), 6);
  EXPECT_EQ(s, fz::error_schedule(20, 0.3, 9));
  const auto none = fz::error_schedule(20, 0.0, 9);
  EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
}

TEST(SimulatedPlanner, AnswersByPurpose) {
  const auto c = fz::gen_cases(fz::Task::kMovement, 1, 0)[0];
  fz::SimulatedPlanner planner(c, fz::error_chain(c, 8, 1));
  fz::ChatRequest verify;
  verify.messages.push_back({fz::Role::kUser, "x"});
  verify.purpose = fz::Purpose::kVerify;
  EXPECT_THROW(planner.complete(verify), fz::ScriptExhausted);
  fz::ChatRequest gen = verify;
  gen.purpose = fz::Purpose::kGenerate;
  EXPECT_NO_THROW(fz::parse_dss(planner.complete(gen)));
  EXPECT_EQ(fz::parse_feedback(planner.complete(verify)).confidence, 3);
  gen.purpose = fz::Purpose::kRectify;
  planner.complete(gen);
  EXPECT_EQ(fz::parse_feedback(planner.complete(verify)).confidence, 5);
  EXPECT_THROW(planner.complete(gen), fz::ScriptExhausted);
}

TEST(RunBenchmark, OracleRectifierReachesFullAccuracy) {
  fz::BenchOptions opts;
  opts.cases_per_task = 10;
  opts.seed = 4;
  const auto result = fz::run_benchmark(fz::simulated_factory(opts, 1.0), local_cfg(), opts);
  ASSERT_EQ(result.tasks.size(), 4u);
  for (const auto& a : result.tasks) {
    EXPECT_EQ(a.cases, 10);
    EXPECT_EQ(a.passed_without, 0) << fz::to_string(a.task);
    EXPECT_EQ(a.passed_with, 10) << fz::to_string(a.task);
  }
}

TEST(RunBenchmark, ThirtyPercentInjectionIsMonotone) {
  fz::BenchOptions opts;
  opts.cases_per_task = 20;
  opts.seed = 11;
  const auto result = fz::run_benchmark(fz::simulated_factory(opts, 0.3), local_cfg(), opts);
  for (const auto& a : result.tasks) {
    EXPECT_DOUBLE_EQ(a.accuracy_without(), 0.7) << fz::to_string(a.task);
    EXPECT_DOUBLE_EQ(a.accuracy_with(), 1.0) << fz::to_string(a.task);
  }
  const auto table = fz::render_table(result);
  EXPECT_NE(table.find("w/o self-refine"), std::string::npos);
  EXPECT_NE(table.find("70%"), std::string::npos);
  EXPECT_NE(table.find("Visibility"), std::string::npos);
}

TEST(RunBenchmark, LlmFeedbackModeAgrees) {
  fz::BenchOptions opts;
  opts.cases_per_task = 5;
  opts.seed = 2;
  const auto result = fz::run_benchmark(fz::simulated_factory(opts, 0.4), fz::RefineConfig{}, opts);
  for (const auto& a : result.tasks) {
    EXPECT_EQ(a.passed_without, 3);
    EXPECT_EQ(a.passed_with, 5);
  }
}

TEST(RunBenchmark, FailingCasesAreRecorded) {
  fz::BenchOptions opts;
  opts.cases_per_task = 3;
  opts.tasks = {fz::Task::kSize};
  auto broken = [](const fz::BenchCase&, std::size_t) -> std::shared_ptr<fz::LlmClient> {
    return std::make_shared<fz::ScriptedClient>(std::vector<std::string>{});
  };
  const auto result = fz::run_benchmark(broken, local_cfg(), opts);
  ASSERT_EQ(result.outcomes.size(), 3u);
  for (const auto& o : result.outcomes) EXPECT_FALSE(o.error.empty());
  EXPECT_EQ(result.accuracy(fz::Task::kSize).passed_with, 0);
}

TEST(RunBenchmark, IndependentOfConcurrency) {
  fz::BenchOptions opts;
  opts.cases_per_task = 6;
  opts.seed = 3;
  opts.concurrency = 1;
  const auto serial = fz::to_json(fz::run_benchmark(fz::simulated_factory(opts, 0.5), local_cfg(), opts));
  opts.concurrency = 8;
  const auto parallel = fz::to_json(fz::run_benchmark(fz::simulated_factory(opts, 0.5), local_cfg(), opts));
  EXPECT_EQ(serial.dump(), parallel.dump());
}
