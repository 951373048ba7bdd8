#include "mbt/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mbt {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
    throw UsageError("invalid value '" + value + "' for '" + key + "' (expected " + want + ")");
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) bad_value(key, value, "an integer");
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size() || value.find('-') != std::string::npos)
            bad_value(key, value, "a non-negative integer");
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "a non-negative integer");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size() || !std::isfinite(v)) bad_value(key, value, "a finite number");
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "a finite number");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    bad_value(key, value, "true/false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value, "comma-separated integers");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) bad_value(key, value, "comma-separated integers");
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << v;
    return os.str();
}

std::string fmt_float(float v) {
    std::ostringstream os;
    os.precision(std::numeric_limits<float>::max_digits10);
    os << v;
    return os.str();
}

std::string fmt_widths(const std::vector<int>& w) {
    std::ostringstream os;
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
    return os.str();
}

}  // namespace

std::vector<KvEntry> parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
    std::vector<KvEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 'key = value', got '" + line + "'");
        KvEntry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty())
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        out.push_back(std::move(e));
    }
    return out;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    // io / run control
    if (key == "out_dir") { out_dir = value; return; }
    if (key == "manifest") { manifest = value; return; }
    if (key == "checkpoint") { checkpoint = value; return; }
    if (key == "image") { image = value; return; }
    if (key == "mask") { mask = value; return; }
    if (key == "split") { split = value; return; }
    if (key == "force") { force = parse_bool(key, value); return; }
    if (key == "resume") { resume = parse_bool(key, value); return; }
    if (key == "oracle_mode") { oracle_mode = parse_bool(key, value); return; }
    if (key == "seed") { seed = parse_u64(key, value); return; }
    // model
    if (key == "tr_depth") { model.tr_depth = static_cast<int>(parse_int(key, value)); return; }
    if (key == "widths") {
        auto w = parse_int_list(key, value);
        if (w.size() != 4) bad_value(key, value, "exactly 4 comma-separated widths");
        model.widths = {w[0], w[1], w[2], w[3]};
        return;
    }
    if (key == "heads") { model.heads = static_cast<int>(parse_int(key, value)); return; }
    if (key == "span") { model.span = static_cast<int>(parse_int(key, value)); return; }
    if (key == "body_edge") { model.body_edge = parse_bool(key, value); return; }
    if (key == "bottleneck_div") { model.bottleneck_div = static_cast<int>(parse_int(key, value)); return; }
    // training
    if (key == "epochs") { epochs = static_cast<int>(parse_int(key, value)); return; }
    if (key == "lr") { opt.lr = static_cast<float>(parse_double(key, value)); return; }
    if (key == "rho") { opt.rho = static_cast<float>(parse_double(key, value)); return; }
    if (key == "opt_eps") { opt.eps = static_cast<float>(parse_double(key, value)); return; }
    if (key == "lambda_body") { weights.body = parse_double(key, value); return; }
    if (key == "lambda_edge") { weights.edge = parse_double(key, value); return; }
    if (key == "lambda_final") { weights.final_weight = parse_double(key, value); return; }
    if (key == "plateau_factor") { plateau.factor = static_cast<float>(parse_double(key, value)); return; }
    if (key == "plateau_patience") { plateau.patience = static_cast<int>(parse_int(key, value)); return; }
    if (key == "plateau_min_delta") { plateau.min_delta = static_cast<float>(parse_double(key, value)); return; }
    if (key == "plateau_min_lr") { plateau.min_lr = static_cast<float>(parse_double(key, value)); return; }
    // synthetic data
    if (key == "synth_width") { synth.width = static_cast<int>(parse_int(key, value)); return; }
    if (key == "synth_height") { synth.height = static_cast<int>(parse_int(key, value)); return; }
    if (key == "synth_cells") { synth.cells = static_cast<int>(parse_int(key, value)); return; }
    if (key == "synth_jitter") { synth.jitter = parse_double(key, value); return; }
    if (key == "synth_border_width") { synth.border_width = parse_double(key, value); return; }
    if (key == "synth_noise_sigma") { synth.noise_sigma = parse_double(key, value); return; }
    if (key == "synth_fuzzy_fraction") { synth.fuzzy_fraction = parse_double(key, value); return; }
    if (key == "patch") { patch = static_cast<int>(parse_int(key, value)); return; }
    if (key == "patches_per_mosaic") { patches_per_mosaic = static_cast<int>(parse_int(key, value)); return; }
    if (key == "train_mosaics") { train_mosaics = static_cast<int>(parse_int(key, value)); return; }
    if (key == "val_mosaics") { val_mosaics = static_cast<int>(parse_int(key, value)); return; }
    if (key == "test_mosaics") { test_mosaics = static_cast<int>(parse_int(key, value)); return; }
    throw UsageError("unknown configuration key '" + key + "'");
}

void RunConfig::apply_file(const std::filesystem::path& path) {
    for (const auto& e : parse_kv_file(path)) {
        try {
            apply(e.key, e.value);
        } catch (const UsageError& err) {
            throw UsageError(path.string() + ":" + std::to_string(e.line) + ": " + err.what());
        }
    }
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_kv() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto put = [&](const char* k, std::string v) { kv.emplace_back(k, std::move(v)); };
    put("seed", std::to_string(seed));
    put("out_dir", out_dir);
    put("manifest", manifest);
    put("checkpoint", checkpoint);
    put("image", image);
    put("mask", mask);
    put("split", split);
    put("force", force ? "true" : "false");
    put("resume", resume ? "true" : "false");
    put("oracle_mode", oracle_mode ? "true" : "false");
    put("tr_depth", std::to_string(model.tr_depth));
    put("widths", fmt_widths({model.widths.begin(), model.widths.end()}));
    put("heads", std::to_string(model.heads));
    put("span", std::to_string(model.span));
    put("body_edge", model.body_edge ? "true" : "false");
    put("bottleneck_div", std::to_string(model.bottleneck_div));
    put("epochs", std::to_string(epochs));
    put("lr", fmt_float(opt.lr));
    put("rho", fmt_float(opt.rho));
    put("opt_eps", fmt_float(opt.eps));
    put("lambda_body", fmt_double(weights.body));
    put("lambda_edge", fmt_double(weights.edge));
    put("lambda_final", fmt_double(weights.final_weight));
    put("plateau_factor", fmt_float(plateau.factor));
    put("plateau_patience", std::to_string(plateau.patience));
    put("plateau_min_delta", fmt_float(plateau.min_delta));
    put("plateau_min_lr", fmt_float(plateau.min_lr));
    put("synth_width", std::to_string(synth.width));
    put("synth_height", std::to_string(synth.height));
    put("synth_cells", std::to_string(synth.cells));
    put("synth_jitter", fmt_double(synth.jitter));
    put("synth_border_width", fmt_double(synth.border_width));
    put("synth_noise_sigma", fmt_double(synth.noise_sigma));
    put("synth_fuzzy_fraction", fmt_double(synth.fuzzy_fraction));
    put("patch", std::to_string(patch));
    put("patches_per_mosaic", std::to_string(patches_per_mosaic));
    put("train_mosaics", std::to_string(train_mosaics));
    put("val_mosaics", std::to_string(val_mosaics));
    put("test_mosaics", std::to_string(test_mosaics));
    return kv;
}

void RunConfig::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    for (const auto& [k, v] : to_kv()) out << k << " = " << v << "\n";
    if (!out.good()) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace mbt
