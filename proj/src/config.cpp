#include "covdet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace covdet {

namespace {

struct Field {
    std::string key; // "section.name"
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        raise_usage("config: cannot parse '" + v + "' as a number for " + key);
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        raise_usage("config: cannot parse '" + v + "' as an integer for " + key);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    raise_usage("config: cannot parse '" + v + "' as a bool for " + key);
}

#define FIELD_DOUBLE(KEY, REF)                                                          \
    {KEY, [](RunConfig& c, const std::string& v) { c.REF = parse_double(KEY, v); },     \
     [](const RunConfig& c) { return fmt_double(c.REF); }}
#define FIELD_INT(KEY, REF)                                                             \
    {KEY, [](RunConfig& c, const std::string& v) { c.REF = static_cast<int>(parse_int(KEY, v)); }, \
     [](const RunConfig& c) { return std::to_string(c.REF); }}
#define FIELD_U64(KEY, REF)                                                             \
    {KEY, [](RunConfig& c, const std::string& v) { c.REF = static_cast<std::uint64_t>(parse_int(KEY, v)); }, \
     [](const RunConfig& c) { return std::to_string(c.REF); }}
#define FIELD_BOOL(KEY, REF)                                                            \
    {KEY, [](RunConfig& c, const std::string& v) { c.REF = parse_bool(KEY, v); },       \
     [](const RunConfig& c) { return c.REF ? "true" : "false"; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        FIELD_U64("run.seed", seed),
        FIELD_INT("run.threads", threads),

        FIELD_DOUBLE("preprocess.window_seconds", prep.window_seconds),
        FIELD_DOUBLE("preprocess.band_lo_hz", prep.band_lo_hz),
        FIELD_DOUBLE("preprocess.band_hi_hz", prep.band_hi_hz),
        FIELD_DOUBLE("preprocess.jitter_sigma", prep.jitter_sigma),
        FIELD_BOOL("preprocess.normalize", prep.normalize),

        FIELD_INT("architecture.n_down", arch.n_down),
        FIELD_INT("architecture.base_channels", arch.base_channels),
        FIELD_INT("architecture.kernel_down", arch.kernel_down),
        FIELD_INT("architecture.residual_per_stage", arch.residual_per_stage),
        FIELD_INT("architecture.kernel_res", arch.kernel_res),

        FIELD_INT("train.batch_size", train.batch_size),
        FIELD_INT("train.epochs", train.epochs),
        FIELD_DOUBLE("train.lr", train.lr),
        FIELD_DOUBLE("train.denoise_sigma", train.denoise_sigma),
        FIELD_DOUBLE("train.validation_fraction", train.validation_fraction),

        FIELD_DOUBLE("trigger.sigma0_seconds", trigger.sigma0_seconds),
        FIELD_DOUBLE("trigger.max_lag_seconds", trigger.max_lag_seconds),

        {"method.method",
         [](RunConfig& c, const std::string& v) { c.method.method = method_from_name(v); },
         [](const RunConfig& c) { return method_name(c.method.method); }},
        FIELD_INT("method.k", method.k),
        FIELD_BOOL("method.include_self", method.include_self),
        FIELD_DOUBLE("method.warp_strength", method.warp_strength),
        FIELD_INT("method.warp_knots", method.warp_knots),

        FIELD_INT("projections.epochs", proj.epochs),
        FIELD_DOUBLE("projections.lr", proj.lr),
        FIELD_INT("projections.batch_size", proj.batch_size),
        FIELD_DOUBLE("projections.anchor_weight", proj.anchor_weight),

        FIELD_INT("evaluate.k_folds", k_folds),
        FIELD_DOUBLE("evaluate.onset_margin_seconds", onset_margin_seconds),
        {"evaluate.stats",
         [](RunConfig& c, const std::string& v) {
             if (v == "batch")
                 c.stats = StatsSource::batch;
             else if (v == "running")
                 c.stats = StatsSource::running;
             else
                 raise_usage("config: evaluate.stats must be batch or running, got '" + v + "'");
         },
         [](const RunConfig& c) { return c.stats == StatsSource::batch ? "batch" : "running"; }},
        FIELD_INT("evaluate.proj_max_records", proj_max_records),

        FIELD_INT("synth.n_event", synth.n_event),
        FIELD_INT("synth.n_noise", synth.n_noise),
        FIELD_DOUBLE("synth.snr_lo", synth.snr_lo),
        FIELD_DOUBLE("synth.snr_hi", synth.snr_hi),
        FIELD_DOUBLE("synth.onset_lo_seconds", synth.onset_lo_seconds),
        FIELD_DOUBLE("synth.onset_hi_seconds", synth.onset_hi_seconds),
        {"synth.noise_spectrum",
         [](RunConfig& c, const std::string& v) {
             if (v == "white")
                 c.synth.noise_spectrum = NoiseSpectrum::white;
             else if (v == "brownish")
                 c.synth.noise_spectrum = NoiseSpectrum::brownish;
             else
                 raise_usage("config: synth.noise_spectrum must be white or brownish, got '" + v + "'");
         },
         [](const RunConfig& c) { return c.synth.noise_spectrum == NoiseSpectrum::white ? "white" : "brownish"; }},
        FIELD_DOUBLE("synth.glitch_fraction", synth.glitch_fraction),
        FIELD_U64("synth.seed", synth.seed),
    };
    return table;
}

#undef FIELD_DOUBLE
#undef FIELD_INT
#undef FIELD_U64
#undef FIELD_BOOL

void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    }
    raise_usage("config: unknown key '" + key + "'");
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace

EvaluationPlan RunConfig::plan() const {
    EvaluationPlan p;
    p.method = method;
    p.arch = arch;
    p.train = train;
    p.train.seed = seed;
    p.proj = proj;
    p.trigger = trigger;
    p.prep = prep;
    p.k_folds = k_folds;
    p.seed = seed;
    p.onset_margin_seconds = onset_margin_seconds;
    p.stats = stats;
    p.proj_max_records = proj_max_records;
    return p;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise_usage("cannot open config file: " + path.string());
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                raise_usage("config: malformed section header at " + path.string() + ":" + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise_usage("config: expected key = value at " + path.string() + ":" + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        set_field(*this, section.empty() ? key : section + "." + key, value);
    }
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) raise_usage("--set expects section.key=value, got '" + assignment + "'");
    set_field(*this, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::dump(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise_runtime("cannot write config: " + path.string());
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << "\n";
            out << "[" << sec << "]\n";
            section = sec;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(*this) << "\n";
    }
}

} // namespace covdet
