#pragma once

#include <string>

#include "dctrain/datagen.hpp"

namespace dctrain {

struct IOError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// PES datasets as JSONL: a header line with the generator descriptor, then
// one {"x":[...],"E":...,"F":[...]} record per sample. Canonical formatting
// makes load-then-save byte-identical.
void save_pes(const std::string& path, const PESDataset& ds);
PESDataset load_pes(const std::string& path);

// PINN point sets as one JSON document with named arrays.
void save_pointsets(const std::string& path, const PINNPointSets& ps);
PINNPointSets load_pointsets(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace dctrain
