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


#include "tiersim/controller.h"

#include "tiersim/errors.h"

namespace tiersim {

InstanceId route_arrival(RoutingState& rs) {
  if (!rs.pending_tickets.empty()) {
    const InstanceId hp = *rs.pending_tickets.begin();
    rs.pending_tickets.erase(rs.pending_tickets.begin());
    return hp;
  }
  if (rs.lp_instances.empty()) {
    throw PreconditionError("route_arrival: no low-priority instance");
  }
  const InstanceId target = rs.lp_instances[rs.rr_cursor_lp];
  rs.rr_cursor_lp = (rs.rr_cursor_lp + 1) % rs.lp_instances.size();
  return target;
}

void add_ticket(RoutingState& rs, InstanceId hp_id) {
  if (!rs.pending_tickets.insert(hp_id).second) {
    throw InvariantViolation("duplicate ticket for instance " +
                             std::to_string(hp_id));
  }
}

bool issue_ticket(RoutingState& rs, InstanceId hp_id, bool hp_waiting_empty) {
  if (!hp_waiting_empty || rs.pending_tickets.count(hp_id) != 0) return false;
  rs.pending_tickets.insert(hp_id);
  return true;
}

std::vector<OffloadAssignment> dispatch_offloads(
    RoutingState& rs, const std::vector<RequestId>& moved, double now,
    double transfer_delay) {
  std::vector<OffloadAssignment> out;
  if (moved.empty()) return out;
  if (rs.hp_instances.empty()) {
    throw ConfigError("offloading needs at least one high-priority instance");
  }
  out.reserve(moved.size());
  for (RequestId id : moved) {
    out.push_back({id, rs.hp_instances[rs.rr_cursor_hp], now + transfer_delay});
    rs.rr_cursor_hp = (rs.rr_cursor_hp + 1) % rs.hp_instances.size();
  }
  return out;
}

}  // namespace tiersim
