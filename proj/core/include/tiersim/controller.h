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

#include <cstddef>
#include <set>
#include <vector>

#include "tiersim/workload.h"

namespace tiersim {

struct RoutingState {
  std::vector<InstanceId> lp_instances;
  std::vector<InstanceId> hp_instances;
  std::size_t rr_cursor_lp = 0;
  std::size_t rr_cursor_hp = 0;
  // HP instances that granted a ticket for the next fresh arrival.
  std::set<InstanceId> pending_tickets;
};

// Pops the lowest-id ticket if any, otherwise round-robins over the LP
// pool. Throws PreconditionError when there is no LP instance.
InstanceId route_arrival(RoutingState& rs);

// Inserts a ticket; InvariantViolation if one is already pending for the
// instance.
void add_ticket(RoutingState& rs, InstanceId hp_id);

// Grants a ticket when the HP queue is empty and none is outstanding.
// Returns whether a ticket was issued; violated preconditions are no-ops.
bool issue_ticket(RoutingState& rs, InstanceId hp_id, bool hp_waiting_empty);

struct OffloadAssignment {
  RequestId request = 0;
  InstanceId instance = kNoInstance;
  double arrive_time = 0.0;
};

// Round-robin over the HP pool; each request reaches its HP instance after
// `transfer_delay` seconds. Throws ConfigError with offloads but no HP.
std::vector<OffloadAssignment> dispatch_offloads(
    RoutingState& rs, const std::vector<RequestId>& moved, double now,
    double transfer_delay);

}  // namespace tiersim
