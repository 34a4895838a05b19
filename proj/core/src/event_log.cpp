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

#include <array>
#include <fstream>
#include <string>

#include "tiersim/errors.h"
#include "tiersim/text_io.h"

namespace tiersim {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kNames = {{
    {EventKind::kArrival, "arrival"},
    {EventKind::kPrefillStart, "prefill_start"},
    {EventKind::kFirstToken, "first_token"},
    {EventKind::kComplete, "complete"},
    {EventKind::kDrop, "drop"},
    {EventKind::kPreempt, "preempt"},
    {EventKind::kOffload, "offload"},
    {EventKind::kOffloadArrive, "offload_arrive"},
    {EventKind::kTicket, "ticket"},
    {EventKind::kBatch, "batch"},
}};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ParseError("unknown event kind '" + std::string(name) + "'");
}

void write_event_log(const std::filesystem::path& path,
                     const std::vector<EventRecord>& events) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "time,instance,kind,request,detail\n";
  for (const auto& e : events) {
    out << format_double(e.time) << ',' << e.instance << ','
        << to_string(e.kind) << ',' << e.request << ',' << e.detail << '\n';
  }
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  std::vector<EventRecord> events;
  for (const auto& row : read_delimited(path, 5)) {
    EventRecord e;
    e.time = row.number(0);
    e.instance = static_cast<InstanceId>(row.integer(1));
    try {
      e.kind = parse_event_kind(row.fields[2]);
    } catch (const ParseError& err) {
      throw ParseError(row.where() + ": " + err.what());
    }
    e.request = row.integer(3);
    e.detail = row.integer(4);
    events.push_back(e);
  }
  return events;
}

}  // namespace tiersim
