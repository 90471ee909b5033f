#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dancenet/diff/param_store.hpp"

namespace dancenet::diff {

// File layout, all integers and reals little-endian:
//   "DANCENET" (8 bytes) | format version (1 byte)
//   then records until end of file:
//   name length u32 | name bytes | rank u32 | rank x u64 dims | f64 values
inline constexpr char kCheckpointMagic[8] = {'D', 'A', 'N', 'C', 'E', 'N', 'E', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Tensor tensor;
};

void write_checkpoint(std::ostream& out, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_checkpoint(std::istream& in);

// Parameters in store order; with_adam appends "adam.m/<name>",
// "adam.v/<name>" and "adam.steps/<name>" records.
std::vector<CheckpointRecord> store_records(const ParamStore& store, bool with_adam);

// Copies parameter values (and Adam state when present) into an existing
// store. Every store entry must be present with a matching shape.
void load_store_records(ParamStore& store, const std::vector<CheckpointRecord>& records);

}  // namespace dancenet::diff
