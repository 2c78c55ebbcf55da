// Copyright 2026 The qkdrate Authors
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

#include <gtest/gtest.h>

#include "properties.hpp"

namespace {

using namespace qkdrate::props;

constexpr int kCases = 200;

void expect_clean(const SuiteResult& r) {
  EXPECT_EQ(r.cases, kCases);
  EXPECT_EQ(r.violations, 0) << r.name << ": worst margin " << r.worst << ", first failure " << r.first_failure;
}

TEST(Property, WeakDuality) { expect_clean(weak_duality(kCases, 11)); }
TEST(Property, GoldenThompsonDirection) { expect_clean(golden_thompson_direction(kCases, 12)); }
TEST(Property, ZorziFixedPoint) { expect_clean(zorzi_fixed_point(kCases, 13)); }
TEST(Property, FannesContinuity) { expect_clean(fannes_continuity(kCases, 14)); }
TEST(Property, MubUnbiasedness) { expect_clean(mub_unbiasedness(kCases, 15)); }
TEST(Property, RefinementMonotonicity) { expect_clean(refinement_monotonicity(kCases, 16)); }
TEST(Property, PinchIdempotence) { expect_clean(pinch_idempotence(kCases, 17)); }
TEST(Property, ScenarioWitnesses) { expect_clean(scenario_witnesses(kCases, 18)); }
TEST(Property, CoherenceConvexity) { expect_clean(coherence_convexity(kCases, 19)); }
TEST(Property, ExpLogRoundTrip) { expect_clean(exp_log_round_trip(kCases, 20)); }
TEST(Property, SupNormUnitaryInvariance) { expect_clean(sup_norm_unitary_invariance(kCases, 21)); }

}  // namespace
