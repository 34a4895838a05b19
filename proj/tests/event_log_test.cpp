/* Copyright 2026 The tiersim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "tiersim/event_log.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tiersim/errors.h"

namespace tiersim {
namespace {

std::filesystem::path TempPath(const std::string& name) {
  return std::filesystem::path(::testing::TempDir()) / name;
}

TEST(EventLogTest, RoundTripIsExact) {
  const std::vector<EventRecord> events = {
      {0.0, 0, EventKind::kArrival, 0, 0},
      {0.1 + 0.2, 2, EventKind::kOffloadArrive, 0, 0},
      {1.0 / 3.0, 2, EventKind::kPrefillStart, 0, 1},
      {2.718281828459045, -1, EventKind::kTicket, -1, 0},
      {3.0, 1, EventKind::kBatch, -1, 17},
      {4.5, 1, EventKind::kDrop, 5, 1},
      {5e-310, 1, EventKind::kComplete, 0, 300},
  };
  const auto path = TempPath("events.csv");
  write_event_log(path, events);
  EXPECT_EQ(read_event_log(path), events);
}

TEST(EventLogTest, KindNamesRoundTrip) {
  for (EventKind k :
       {EventKind::kArrival, EventKind::kPrefillStart, EventKind::kFirstToken,
        EventKind::kComplete, EventKind::kDrop, EventKind::kPreempt,
        EventKind::kOffload, EventKind::kOffloadArrive, EventKind::kTicket,
        EventKind::kBatch}) {
    EXPECT_EQ(parse_event_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_event_kind("teleport"), ParseError);
}

TEST(EventLogTest, BadRowNamesLine) {
  const auto path = TempPath("bad_events.csv");
  std::ofstream(path) << "time,instance,kind,request,detail\n"
                      << "0,0,arrival,0,0\n"
                      << "1,0,teleport,0,0\n";
  try {
    read_event_log(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_events.csv:3"),
              std::string::npos)
        << e.what();
  }
}

}  // namespace
}  // namespace tiersim
