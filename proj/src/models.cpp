#include "ensemblekit/models.hpp"

#include "ensemblekit/error.hpp"

#include <random>

namespace ensemblekit {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;   // FNV-1a
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + (h << 1) + (h >> 1);   // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31) ^ h;
}

double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

namespace {

void check(const RuntimeDistribution& d, const std::string& what) {
    using K = RuntimeDistribution::Kind;
    if (d.kind == K::Fixed && !(d.lo_s > 0))
        throw ConfigError(what + ": fixed runtime must be > 0");
    if (d.kind == K::Uniform && (!(d.lo_s > 0) || d.lo_s > d.hi_s))
        throw ConfigError(what + ": uniform runtime needs 0 < lo ≤ hi");
}

} // namespace

void RuntimeModel::validate() const {
    check(default_distribution, "default runtime");
    for (const auto& [cls, d] : by_class) check(d, "runtime class " + cls);
}

double RuntimeModel::sample(const TaskDescription& desc) const {
    const RuntimeDistribution* d = &default_distribution;
    auto cls = desc.tags.find("class");
    const std::string& key = cls != desc.tags.end() ? cls->second : desc.stage_name;
    if (auto it = by_class.find(key); it != by_class.end()) d = &it->second;

    switch (d->kind) {
    case RuntimeDistribution::Kind::Fixed:
        return d->lo_s;
    case RuntimeDistribution::Kind::Uniform: {
        std::mt19937_64 gen(mix_seed(seed, desc.uid));
        return d->lo_s + unit_interval(gen()) * (d->hi_s - d->lo_s);
    }
    case RuntimeDistribution::Kind::FromExpected:
        if (!desc.expected_runtime_s || !(*desc.expected_runtime_s > 0))
            throw ConfigError("task " + desc.uid + " has no expected_runtime_s and its class '" +
                              key + "' has no runtime distribution");
        return *desc.expected_runtime_s;
    }
    return 0;
}

FailureModel FailureModel::without_node_faults() const {
    FailureModel out = *this;
    std::erase_if(out.faults, [](const Fault& f) { return f.kind != Fault::Kind::TaskFault; });
    return out;
}

} // namespace ensemblekit
