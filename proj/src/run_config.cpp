// SPDX-License-Identifier: Apache-2.0
#include "editaction/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace editaction {

namespace {

double to_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) {
        throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

std::string num(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields()
{
    static const std::vector<std::pair<std::string, Field>> table = {
        {"lambda1", {[](RunConfig& c, const std::string& v) { c.train.lambda1 = to_double("lambda1", v); },
                     [](const RunConfig& c) { return num(c.train.lambda1); }}},
        {"lambda2", {[](RunConfig& c, const std::string& v) { c.train.lambda2 = to_double("lambda2", v); },
                     [](const RunConfig& c) { return num(c.train.lambda2); }}},
        {"lr", {[](RunConfig& c, const std::string& v) { c.train.lr = to_double("lr", v); },
                [](const RunConfig& c) { return num(c.train.lr); }}},
        {"batch_size",
         {[](RunConfig& c, const std::string& v) { c.train.batch_size = static_cast<int>(to_int("batch_size", v)); },
          [](const RunConfig& c) { return std::to_string(c.train.batch_size); }}},
        {"steps", {[](RunConfig& c, const std::string& v) { c.train.steps = static_cast<int>(to_int("steps", v)); },
                   [](const RunConfig& c) { return std::to_string(c.train.steps); }}},
        {"freeze_cross_attention",
         {[](RunConfig& c, const std::string& v) {
              c.train.freeze_cross_attention = to_bool("freeze_cross_attention", v);
          },
          [](const RunConfig& c) { return std::string(c.train.freeze_cross_attention ? "true" : "false"); }}},
        {"drop_image", {[](RunConfig& c, const std::string& v) { c.train.drop_rates.image = to_double("drop_image", v); },
                        [](const RunConfig& c) { return num(c.train.drop_rates.image); }}},
        {"drop_text", {[](RunConfig& c, const std::string& v) { c.train.drop_rates.text = to_double("drop_text", v); },
                       [](const RunConfig& c) { return num(c.train.drop_rates.text); }}},
        {"drop_both", {[](RunConfig& c, const std::string& v) { c.train.drop_rates.both = to_double("drop_both", v); },
                       [](const RunConfig& c) { return num(c.train.drop_rates.both); }}},
        {"train_resolution",
         {[](RunConfig& c, const std::string& v) {
              c.train.train_resolution = static_cast<int>(to_int("train_resolution", v));
              c.arch.resolution = c.train.train_resolution;
          },
          [](const RunConfig& c) { return std::to_string(c.train.train_resolution); }}},
        {"si", {[](RunConfig& c, const std::string& v) { c.train.guidance_defaults.image_scale = to_double("si", v); },
                [](const RunConfig& c) { return num(c.train.guidance_defaults.image_scale); }}},
        {"sc", {[](RunConfig& c, const std::string& v) { c.train.guidance_defaults.text_scale = to_double("sc", v); },
                [](const RunConfig& c) { return num(c.train.guidance_defaults.text_scale); }}},
        {"seed", {[](RunConfig& c, const std::string& v) { c.train.seed = static_cast<std::uint64_t>(to_int("seed", v)); },
                  [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
        {"grad_clip", {[](RunConfig& c, const std::string& v) { c.train.grad_clip = to_double("grad_clip", v); },
                       [](const RunConfig& c) { return num(c.train.grad_clip); }}},
        {"diffusion_steps",
         {[](RunConfig& c, const std::string& v) {
              c.train.diffusion_steps = static_cast<int>(to_int("diffusion_steps", v));
              c.arch.diffusion_steps = c.train.diffusion_steps;
          },
          [](const RunConfig& c) { return std::to_string(c.train.diffusion_steps); }}},
        {"beta_start", {[](RunConfig& c, const std::string& v) {
                            c.train.beta_start = to_double("beta_start", v);
                            c.arch.beta_start = c.train.beta_start;
                        },
                        [](const RunConfig& c) { return num(c.train.beta_start); }}},
        {"beta_end", {[](RunConfig& c, const std::string& v) {
                          c.train.beta_end = to_double("beta_end", v);
                          c.arch.beta_end = c.train.beta_end;
                      },
                      [](const RunConfig& c) { return num(c.train.beta_end); }}},
        {"widths",
         {[](RunConfig& c, const std::string& v) {
              std::vector<int> w;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                  w.push_back(static_cast<int>(to_int("widths", trim(item))));
              }
              c.arch.widths = w;
          },
          [](const RunConfig& c) {
              std::string out;
              for (std::size_t k = 0; k < c.arch.widths.size(); ++k) {
                  out += (k == 0 ? "" : ",") + std::to_string(c.arch.widths[k]);
              }
              return out;
          }}},
        {"patch", {[](RunConfig& c, const std::string& v) { c.arch.patch = static_cast<int>(to_int("patch", v)); },
                   [](const RunConfig& c) { return std::to_string(c.arch.patch); }}},
        {"heads", {[](RunConfig& c, const std::string& v) { c.arch.heads = static_cast<int>(to_int("heads", v)); },
                   [](const RunConfig& c) { return std::to_string(c.arch.heads); }}},
        {"text_dim",
         {[](RunConfig& c, const std::string& v) { c.arch.text_dim = static_cast<int>(to_int("text_dim", v)); },
          [](const RunConfig& c) { return std::to_string(c.arch.text_dim); }}},
        {"output", {[](RunConfig& c, const std::string& v) { c.arch.output = output_from_string(v); },
                    [](const RunConfig& c) { return std::string(to_string(c.arch.output)); }}},
        {"static_on_x0",
         {[](RunConfig& c, const std::string& v) { c.train.static_on_x0 = to_bool("static_on_x0", v); },
          [](const RunConfig& c) { return std::string(c.train.static_on_x0 ? "true" : "false"); }}},
        {"regime", {[](RunConfig& c, const std::string& v) { c.regime = regime_from_string(v); },
                    [](const RunConfig& c) { return std::string(to_string(c.regime)); }}},
        {"train_manifest", {[](RunConfig& c, const std::string& v) { c.train_manifest = v; },
                            [](const RunConfig& c) { return c.train_manifest; }}},
        {"test_manifest", {[](RunConfig& c, const std::string& v) { c.test_manifest = v; },
                           [](const RunConfig& c) { return c.test_manifest; }}},
        {"out_dir", {[](RunConfig& c, const std::string& v) { c.out_dir = v; },
                     [](const RunConfig& c) { return c.out_dir; }}},
        {"inference_steps",
         {[](RunConfig& c, const std::string& v) { c.inference_steps = static_cast<int>(to_int("inference_steps", v)); },
          [](const RunConfig& c) { return std::to_string(c.inference_steps); }}},
        {"eval_seeds",
         {[](RunConfig& c, const std::string& v) { c.eval_seeds = static_cast<int>(to_int("eval_seeds", v)); },
          [](const RunConfig& c) { return std::to_string(c.eval_seeds); }}},
        {"workers", {[](RunConfig& c, const std::string& v) { c.workers = static_cast<int>(to_int("workers", v)); },
                     [](const RunConfig& c) { return std::to_string(c.workers); }}},
    };
    return table;
}

} // namespace

RunConfig::RunConfig()
{
    out_dir = default_output_dir().string();
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(*this, value);
            return;
        }
    }
    throw std::invalid_argument("unknown configuration key: " + key);
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, field] : fields()) {
        out.emplace_back(name, field.get(*this));
    }
    return out;
}

const std::vector<std::string>& RunConfig::keys()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, field] : fields()) {
            n.push_back(name);
        }
        return n;
    }();
    return names;
}

void RunConfig::load_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string RunConfig::to_text() const
{
    std::ostringstream os;
    for (const auto& [k, v] : entries()) {
        os << k << " = " << v << '\n';
    }
    return os.str();
}

void RunConfig::apply_profile(const std::string& name)
{
    if (name == "toy") {
        arch.output = ArchConfig::Output::x0_residual;
        arch.patch = 4;
        arch.widths = {64, 128, 256};
        train.steps = 1000;
        train.lr = 1e-4;
        return;
    }
    if (name != "paper") {
        throw std::invalid_argument("unknown profile: " + name);
    }
    train.train_resolution = 256;
    arch.resolution = 256;
    arch.output = ArchConfig::Output::eps;
    train.batch_size = 64;
    train.steps = 10000;
    train.lr = 1e-4;
    train.lambda1 = 5e-4;
    train.lambda2 = 3e-2;
    train.guidance_defaults = {1.0, 7.5};
    inference_steps = 100;
    eval_seeds = 3;
}

SamplerSettings RunConfig::sampler() const
{
    SamplerSettings s;
    s.guidance = train.guidance_defaults;
    s.steps = inference_steps;
    return s;
}

std::filesystem::path default_output_dir()
{
    const char* env = std::getenv("EDITACTION_OUT");
    return env != nullptr && *env != '\0' ? std::filesystem::path(env) : std::filesystem::path("runs");
}

} // namespace editaction
