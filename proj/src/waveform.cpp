#include "covdet/waveform.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "covdet/errors.hpp"

namespace covdet {

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'C', 'V', 'R'};
constexpr std::uint32_t kContainerVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return in.gcount() == sizeof(T);
}

bool all_finite(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void read_container(const std::filesystem::path& path, std::vector<Waveform>& out, std::vector<RecordError>& errors) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise_data("cannot open container: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        raise_data("not a waveform container (bad magic): " + path.string());
    std::uint32_t version = 0;
    if (!read_pod(in, version)) raise_data("truncated container header: " + path.string());
    if (version != kContainerVersion)
        raise_data("unsupported container version " + std::to_string(version) + " in " + path.string());
    std::uint64_t count = 0;
    if (!read_pod(in, count)) raise_data("truncated container header: " + path.string());

    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t id_len = 0;
        if (!read_pod(in, id_len)) {
            errors.push_back({"<record " + std::to_string(i) + ">", "truncated record header in " + path.string()});
            return;
        }
        Waveform w;
        w.id.resize(id_len);
        in.read(w.id.data(), id_len);
        std::uint8_t label = 255;
        std::int64_t onset = -1;
        std::uint32_t n = 0;
        if (in.gcount() != static_cast<std::streamsize>(id_len) || !read_pod(in, label) || !read_pod(in, onset) ||
            !read_pod(in, w.sample_rate_hz) || !read_pod(in, n)) {
            errors.push_back({w.id.empty() ? "<record " + std::to_string(i) + ">" : w.id,
                              "truncated record header in " + path.string()});
            return;
        }
        w.label = label == 0 ? Label::noise : (label == 1 ? Label::event : Label::unlabeled);
        if (onset >= 0) w.onset_index = onset;
        w.n = static_cast<int>(n);
        w.samples.resize(static_cast<std::size_t>(kChannels) * n);
        in.read(reinterpret_cast<char*>(w.samples.data()), static_cast<std::streamsize>(w.samples.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(w.samples.size() * sizeof(float))) {
            errors.push_back({w.id, "shape error: payload truncated, expected " + std::to_string(kChannels) + "x" +
                                        std::to_string(n) + " samples"});
            return;
        }
        if (!all_finite(w.samples)) {
            errors.push_back({w.id, "non-finite samples"});
            continue;
        }
        if (w.onset_index && (*w.onset_index >= w.n || w.label != Label::event)) {
            errors.push_back({w.id, "invalid onset metadata (onset=" + std::to_string(*w.onset_index) +
                                        ", n=" + std::to_string(w.n) + ", label=" + label_name(w.label) + ")"});
            continue;
        }
        out.push_back(std::move(w));
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

void read_csv(const std::filesystem::path& path, std::vector<Waveform>& out, std::vector<RecordError>& errors) {
    std::ifstream in(path);
    if (!in) raise_data("cannot open csv: " + path.string());
    std::string line;
    if (!std::getline(in, line)) raise_data("empty csv: " + path.string());
    auto header = split_csv_line(line);
    if (header.size() < 5 || header[0] != "id" || header[1] != "label" || header[2] != "onset" || header[3] != "ch")
        raise_data("csv header must start with id,label,onset,ch,t0,... in " + path.string());
    const std::size_t n_decl = header.size() - 4;

    Waveform cur;
    int have_ch = 0;
    bool bad = false;
    auto flush = [&]() {
        if (have_ch == 0) return;
        if (!bad) {
            if (have_ch != kChannels) {
                errors.push_back({cur.id, "expected " + std::to_string(kChannels) + " channel rows, got " +
                                              std::to_string(have_ch)});
            } else if (!all_finite(cur.samples)) {
                errors.push_back({cur.id, "non-finite samples"});
            } else {
                out.push_back(cur);
            }
        }
        cur = Waveform{};
        have_ch = 0;
        bad = false;
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        const std::string& id = f[0];
        if (have_ch > 0 && id != cur.id) flush();
        if (f.size() != header.size()) {
            errors.push_back({id, "shape error: record declares " + std::to_string(n_decl) + " samples, row has " +
                                      std::to_string(f.size() >= 4 ? f.size() - 4 : 0)});
            if (have_ch > 0 && id == cur.id) bad = true;
            // swallow the rest of this record's rows
            if (id == cur.id || have_ch == 0) {
                cur.id = id;
                have_ch = have_ch == 0 ? 1 : have_ch + 1;
                bad = true;
            }
            continue;
        }
        if (have_ch == 0) {
            cur = Waveform(id, static_cast<int>(n_decl));
            cur.label = f[1] == "event" ? Label::event : (f[1] == "noise" ? Label::noise : Label::unlabeled);
            if (!f[2].empty() && f[2] != "-1") cur.onset_index = std::stoll(f[2]);
        }
        const int ch = std::stoi(f[3]);
        if (ch < 0 || ch >= kChannels) {
            errors.push_back({id, "channel index " + f[3] + " out of range"});
            bad = true;
            ++have_ch;
            continue;
        }
        if (!bad) {
            try {
                for (std::size_t i = 0; i < n_decl; ++i)
                    cur.channel(ch)[i] = std::stof(f[4 + i]);
            } catch (const std::exception&) {
                errors.push_back({id, "unparseable sample value"});
                bad = true;
            }
        }
        ++have_ch;
        if (have_ch == kChannels) flush();
    }
    flush();
}

} // namespace

std::string label_name(Label l) {
    switch (l) {
        case Label::noise: return "noise";
        case Label::event: return "event";
        default: return "unlabeled";
    }
}

void write_container(const std::filesystem::path& path, const std::vector<Waveform>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise_runtime("cannot open container for writing: " + path.string());
    out.write(kMagic, 4);
    write_pod(out, kContainerVersion);
    write_pod(out, static_cast<std::uint64_t>(records.size()));
    for (const auto& w : records) {
        write_pod(out, static_cast<std::uint32_t>(w.id.size()));
        out.write(w.id.data(), static_cast<std::streamsize>(w.id.size()));
        write_pod(out, static_cast<std::uint8_t>(w.label));
        write_pod(out, w.onset_index ? *w.onset_index : std::int64_t{-1});
        write_pod(out, w.sample_rate_hz);
        write_pod(out, static_cast<std::uint32_t>(w.n));
        out.write(reinterpret_cast<const char*>(w.samples.data()),
                  static_cast<std::streamsize>(w.samples.size() * sizeof(float)));
    }
    if (!out) raise_runtime("container write failed: " + path.string());
}

void read_waveform_file(const std::filesystem::path& path, std::vector<Waveform>& out, std::vector<RecordError>& errors) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) raise_data("cannot open waveform file: " + path.string());
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (std::memcmp(magic, kMagic, 4) == 0)
        read_container(path, out, errors);
    else
        read_csv(path, out, errors);
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise_data("cannot open manifest: " + path.string());
    const auto base = path.parent_path();
    std::vector<std::filesystem::path> files;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        line.erase(0, start);
        if (line.empty()) continue;
        std::filesystem::path p(line);
        files.push_back(p.is_absolute() ? p : base / p);
    }
    return files;
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& files) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise_runtime("cannot open manifest for writing: " + path.string());
    for (const auto& f : files) out << f.generic_string() << "\n";
}

LoadResult load_dataset(const std::filesystem::path& manifest_path) {
    LoadResult res;
    std::set<std::string> seen;
    for (const auto& file : read_manifest(manifest_path)) {
        std::vector<Waveform> records;
        read_waveform_file(file, records, res.errors);
        for (auto& w : records) {
            if (!seen.insert(w.id).second) {
                res.errors.push_back({w.id, "duplicate id (also in an earlier file)"});
                continue;
            }
            ManifestEntry e{file, w.id, w.label, w.onset_index};
            res.manifest.entries.push_back(std::move(e));
            switch (w.label) {
                case Label::event: ++res.manifest.n_event; break;
                case Label::noise: ++res.manifest.n_noise; break;
                default: ++res.manifest.n_unlabeled; break;
            }
            res.records.push_back(std::move(w));
        }
    }
    return res;
}

} // namespace covdet
