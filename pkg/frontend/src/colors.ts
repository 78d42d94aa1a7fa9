// Status -> color mappings, shared by every renderer. Pure data so snapshot
// replays always produce identical frames.

import type { ReachStatus, SegmentStatus } from "./protocol.js";

export const SEGMENT_COLORS: Record<SegmentStatus, string> = {
  completed: "gray",
  reachable: "blue",
  unreachable: "red",
};

export const REACH_COLORS: Record<ReachStatus, string> = {
  reachable: "green",
  unreachable: "red",
};
