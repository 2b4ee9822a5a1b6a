#include "cdfsl/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cdfsl/rng.hpp"

namespace cdfsl {

void ParamSet::add(std::string name, Tensor t) {
    if (has(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
    entries_.push_back({std::move(name), std::move(t)});
}

const Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::out_of_range("ParamSet: missing " + name);
}

Tensor& ParamSet::get(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::out_of_range("ParamSet: missing " + name);
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

bool ParamSet::operator==(const ParamSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != o.entries_[i].name) return false;
        if (entries_[i].tensor.shape != o.entries_[i].tensor.shape) return false;
        if (entries_[i].tensor.values != o.entries_[i].tensor.values) return false;
    }
    return true;
}

Tensor xavier_uniform(int fan_in, int fan_out, std::uint64_t seed) {
    if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("xavier_uniform: non-positive dimension");
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed);
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& v : t.values) v = rng.uniform(-a, a);
    return t;
}

void save_params(const ParamSet& params, const std::filesystem::path& stem) {
    nlohmann::json manifest = nlohmann::json::array();
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("save_params: cannot open " + stem.string() + ".bin");
    for (const auto& e : params.entries()) {
        manifest.push_back({{"name", e.name}, {"shape", e.tensor.shape}});
        static_assert(sizeof(double) == 8);
        for (double v : e.tensor.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char buf[8];
            for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            bin.write(reinterpret_cast<const char*>(buf), 8);
        }
    }
    std::ofstream mf(stem.string() + ".json");
    if (!mf) throw std::runtime_error("save_params: cannot open " + stem.string() + ".json");
    mf << manifest.dump(2) << "\n";
}

ParamSet load_params(const std::filesystem::path& stem) {
    std::ifstream mf(stem.string() + ".json");
    if (!mf) throw std::runtime_error("load_params: missing manifest " + stem.string() + ".json");
    nlohmann::json manifest = nlohmann::json::parse(mf);
    std::ifstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("load_params: missing blob " + stem.string() + ".bin");

    ParamSet out;
    for (const auto& item : manifest) {
        std::string name = item.at("name").get<std::string>();
        std::vector<int> shape = item.at("shape").get<std::vector<int>>();
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::runtime_error("load_params: bad shape for " + name);
            n *= static_cast<std::size_t>(d);
        }
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i) {
            unsigned char buf[8];
            bin.read(reinterpret_cast<char*>(buf), 8);
            if (!bin) throw std::runtime_error("load_params: blob truncated at " + name);
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
            std::memcpy(&values[i], &bits, 8);
        }
        out.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    bin.peek();
    if (!bin.eof()) throw std::runtime_error("load_params: blob longer than manifest");
    return out;
}

double fd_check(const LossClosure& closure, const ParamSet& params, double step) {
    if (step <= 0.0) throw std::invalid_argument("fd_check: step must be positive");
    LossEval base = closure(params);
    if (!std::isfinite(base.value)) throw GraphError("fd_check: non-finite base loss");

    double max_err = 0.0;
    ParamSet probe = params;
    for (auto& e : probe.entries()) {
        const Tensor* analytic = nullptr;
        auto it = base.grads.find(e.name);
        if (it != base.grads.end()) analytic = &it->second;
        for (int i = 0; i < e.tensor.size(); ++i) {
            double saved = e.tensor.values[i];
            e.tensor.values[i] = saved + step;
            double fp = closure(probe).value;
            e.tensor.values[i] = saved - step;
            double fm = closure(probe).value;
            e.tensor.values[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw GraphError("fd_check: non-finite probe at parameter " + e.name);
            double fd = (fp - fm) / (2.0 * step);
            double an = analytic ? analytic->values[i] : 0.0;
            double err = std::abs(an - fd) / (std::abs(fd) + 1e-8);
            if (err > max_err) max_err = err;
        }
    }
    return max_err;
}

}  // namespace cdfsl
