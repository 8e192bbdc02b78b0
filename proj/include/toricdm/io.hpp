#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "toricdm/ensemble.hpp"
#include "toricdm/rbm.hpp"
#include "toricdm/similarity.hpp"

namespace toricdm::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// FNV-1a 64-bit content digest, hex-encoded.
std::string fnv1a64_hex(const void* data, std::size_t n);
std::string fnv1a64_hex(const std::string& s);
std::string file_digest(const fs::path& path);

// Fixed, locale-independent float formatting used in every CSV/JSON emitter
// so that identical runs produce byte-identical files.
std::string format_double(double v);

void write_text(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

// ---- RbmParams -----------------------------------------------------------
// Binary layout: magic "TDMR", u32 version, u32 lx, u32 ly, then 10*lx*ly
// little-endian doubles in (cell, slot) order.
void save_params_binary(const fs::path& path, const RbmParams& p);
RbmParams load_params_binary(const fs::path& path);
json params_to_json(const RbmParams& p);
RbmParams params_from_json(const json& j);

// ---- SimilarityMatrix ----------------------------------------------------
// <stem>.json carries {measure, m, fraction}; <stem>.bin the m(m+1)/2
// upper-triangle doubles (row-major, diagonal included).
void save_similarity(const fs::path& stem, const SimilarityMatrix& S);
SimilarityMatrix load_similarity(const fs::path& stem);
void write_similarity_csv(const fs::path& path, const SimilarityMatrix& S);

// ---- Ensemble directory ---------------------------------------------------
// <dir>/metadata.json, <dir>/manifest.csv with one row per member
// (member_id, chain_id, step, energy_mean, energy_stderr) and
// <dir>/members/NNNNN.rbm in the binary parameter format.
void save_ensemble(const fs::path& dir, const Ensemble& ens, const json& metadata);
Ensemble load_ensemble(const fs::path& dir);

// ---- CSV ------------------------------------------------------------------
struct CsvWriter {
    std::string buffer;
    void header(const std::vector<std::string>& cols);
    void row(const std::vector<std::string>& cells);
    void save(const fs::path& path) const;
};

}  // namespace toricdm::io
