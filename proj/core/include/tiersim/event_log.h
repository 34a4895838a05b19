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


#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "tiersim/workload.h"

namespace tiersim {

enum class EventKind {
  kArrival,        // instance = routed instance
  kPrefillStart,   // detail = 1 when the instance is high-priority
  kFirstToken,
  kComplete,       // detail = output_len
  kDrop,           // detail = 0 expired in queue, 1 can never fit in KV
  kPreempt,
  kOffload,        // instance = source LP
  kOffloadArrive,  // instance = target HP
  kTicket,         // request = -1
  kBatch,          // request = -1, detail = requests in the batch
};

std::string_view to_string(EventKind kind);
// Throws ParseError for an unknown name.
EventKind parse_event_kind(std::string_view name);

struct EventRecord {
  double time = 0.0;
  InstanceId instance = kNoInstance;
  EventKind kind = EventKind::kArrival;
  RequestId request = -1;
  int64_t detail = 0;

  bool operator==(const EventRecord&) const = default;
};

// Delimited text: time,instance,kind,request,detail. Times are written so
// that they read back bit-identically.
void write_event_log(const std::filesystem::path& path,
                     const std::vector<EventRecord>& events);
std::vector<EventRecord> read_event_log(const std::filesystem::path& path);

}  // namespace tiersim
