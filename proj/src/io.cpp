#include "toricdm/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace toricdm::io {

std::string fnv1a64_hex(const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string fnv1a64_hex(const std::string& s) { return fnv1a64_hex(s.data(), s.size()); }

std::string file_digest(const fs::path& path) { return fnv1a64_hex(read_text(path)); }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

// ---- RbmParams -------------------------------------------------------------

namespace {
constexpr char kParamsMagic[4] = {'T', 'D', 'M', 'R'};
constexpr std::uint32_t kParamsVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    return v;
}
}  // namespace

void save_params_binary(const fs::path& path, const RbmParams& p) {
    std::string out;
    out.append(kParamsMagic, 4);
    put_u32(out, kParamsVersion);
    put_u32(out, static_cast<std::uint32_t>(p.lx));
    put_u32(out, static_cast<std::uint32_t>(p.ly));
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size() * sizeof(double));
    write_text(path, out);
}

RbmParams load_params_binary(const fs::path& path) {
    std::string s = read_text(path);
    if (s.size() < 16 || std::memcmp(s.data(), kParamsMagic, 4) != 0)
        throw std::runtime_error("bad parameter file: " + path.string());
    if (get_u32(s, 4) != kParamsVersion) throw std::runtime_error("unsupported parameter file version");
    RbmParams p(static_cast<int>(get_u32(s, 8)), static_cast<int>(get_u32(s, 12)));
    std::size_t n = p.values.size() * sizeof(double);
    if (s.size() != 16 + n) throw std::runtime_error("truncated parameter file: " + path.string());
    std::memcpy(p.values.data(), s.data() + 16, n);
    return p;
}

json params_to_json(const RbmParams& p) {
    return json{{"lx", p.lx}, {"ly", p.ly}, {"params", p.values}};
}

RbmParams params_from_json(const json& j) {
    RbmParams p(j.at("lx").get<int>(), j.at("ly").get<int>());
    auto vals = j.at("params").get<std::vector<double>>();
    if (vals.size() != p.values.size()) throw std::runtime_error("params json: wrong length");
    p.values = std::move(vals);
    return p;
}

// ---- SimilarityMatrix ------------------------------------------------------

void save_similarity(const fs::path& stem, const SimilarityMatrix& S) {
    json header{{"measure", measure_name(S.tag)}, {"m", S.m}, {"fraction", S.fraction}};
    write_text(fs::path(stem).concat(".json"), header.dump(2) + "\n");

    std::string bin;
    bin.reserve(static_cast<std::size_t>(S.m) * (S.m + 1) / 2 * sizeof(double));
    for (int i = 0; i < S.m; ++i)
        for (int j = i; j < S.m; ++j) {
            double v = S.get(i, j);
            bin.append(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    write_text(fs::path(stem).concat(".bin"), bin);
}

SimilarityMatrix load_similarity(const fs::path& stem) {
    json header = json::parse(read_text(fs::path(stem).concat(".json")));
    int m = header.at("m").get<int>();
    SimilarityMatrix S(m, measure_from_name(header.at("measure").get<std::string>()));
    S.fraction = header.value("fraction", 0.0);
    std::string bin = read_text(fs::path(stem).concat(".bin"));
    std::size_t expect = static_cast<std::size_t>(m) * (m + 1) / 2 * sizeof(double);
    if (bin.size() != expect) throw std::runtime_error("similarity binary has wrong size");
    std::size_t off = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            double v;
            std::memcpy(&v, bin.data() + off, sizeof(double));
            off += sizeof(double);
            S.set(i, j, v);
        }
    return S;
}

void write_similarity_csv(const fs::path& path, const SimilarityMatrix& S) {
    CsvWriter w;
    for (int i = 0; i < S.m; ++i) {
        std::vector<std::string> cells;
        cells.reserve(S.m);
        for (int j = 0; j < S.m; ++j) cells.push_back(format_double(S.get(i, j)));
        w.row(cells);
    }
    w.save(path);
}

// ---- Ensemble ---------------------------------------------------------------

void save_ensemble(const fs::path& dir, const Ensemble& ens, const json& metadata) {
    fs::create_directories(dir / "members");
    json meta = metadata;
    meta["n_members"] = ens.members.size();
    meta["n_energy_estimates"] = ens.n_energy_estimates;
    write_text(dir / "metadata.json", meta.dump(2) + "\n");

    CsvWriter w;
    w.header({"member_id", "chain_id", "step", "energy_mean", "energy_stderr"});
    char name[32];
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        const auto& mb = ens.members[i];
        w.row({std::to_string(i), std::to_string(mb.chain_id), std::to_string(mb.step_index),
               format_double(mb.energy.mean), format_double(mb.energy.std_error)});
        std::snprintf(name, sizeof(name), "%05zu.rbm", i);
        save_params_binary(dir / "members" / name, mb.params);
    }
    w.save(dir / "manifest.csv");
}

Ensemble load_ensemble(const fs::path& dir) {
    json meta = json::parse(read_text(dir / "metadata.json"));
    Ensemble ens;
    ens.n_energy_estimates = meta.value("n_energy_estimates", 0L);
    std::size_t n = meta.at("n_members").get<std::size_t>();

    std::string csv = read_text(dir / "manifest.csv");
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t nl = csv.find('\n', pos);
        if (nl == std::string::npos) nl = csv.size();
        if (nl > pos) lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.size() != n + 1) throw std::runtime_error("ensemble manifest row count mismatch");

    char name[32];
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& line = lines[i + 1];
        std::vector<std::string> cells;
        std::size_t p = 0;
        while (p <= line.size()) {
            std::size_t c = line.find(',', p);
            if (c == std::string::npos) c = line.size();
            cells.push_back(line.substr(p, c - p));
            p = c + 1;
        }
        if (cells.size() != 5) throw std::runtime_error("ensemble manifest: bad row");
        EnsembleMember mb;
        mb.chain_id = std::stoi(cells[1]);
        mb.step_index = std::stoi(cells[2]);
        mb.energy.mean = std::stod(cells[3]);
        mb.energy.std_error = std::stod(cells[4]);
        std::snprintf(name, sizeof(name), "%05zu.rbm", i);
        mb.params = load_params_binary(dir / "members" / name);
        ens.members.push_back(std::move(mb));
    }
    return ens;
}

// ---- CSV --------------------------------------------------------------------

void CsvWriter::header(const std::vector<std::string>& cols) { row(cols); }

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer.push_back(',');
        buffer += cells[i];
    }
    buffer.push_back('\n');
}

void CsvWriter::save(const fs::path& path) const { write_text(path, buffer); }

}  // namespace toricdm::io
