#include "vrls/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace vrls::nn {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "VRLSCKPT";

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
    if (in.size() < sizeof(T)) throw std::runtime_error("truncated checkpoint");
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

}  // namespace

const ParameterSet& Checkpoint::group(const std::string& name) const {
    for (const auto& [n, set] : groups)
        if (n == name) return set;
    throw std::out_of_range("checkpoint has no group '" + name + "'");
}

bool Checkpoint::has_group(const std::string& name) const {
    for (const auto& g : groups)
        if (g.first == name) return true;
    return false;
}

std::string serialize(const Checkpoint& ck) {
    json layout = json::array();
    for (const auto& [name, set] : ck.groups) {
        json shapes = json::array();
        for (const auto& t : set) shapes.push_back(t.shape());
        layout.push_back({{"name", name}, {"shapes", shapes}});
    }
    const std::string header = json{{"meta", ck.meta}, {"groups", layout}}.dump();

    std::string out(kMagic);
    put<std::uint32_t>(out, Checkpoint::kVersion);
    put<std::uint64_t>(out, header.size());
    out += header;
    for (const auto& [name, set] : ck.groups)
        for (const auto& t : set)
            for (double v : t.values()) put<double>(out, v);
    return out;
}

Checkpoint deserialize(std::string_view in) {
    if (in.substr(0, kMagic.size()) != kMagic) throw std::runtime_error("not a checkpoint (bad magic)");
    in.remove_prefix(kMagic.size());
    const auto version = take<std::uint32_t>(in);
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const auto header_len = take<std::uint64_t>(in);
    if (in.size() < header_len) throw std::runtime_error("truncated checkpoint header");
    const json header = json::parse(in.substr(0, header_len));
    in.remove_prefix(header_len);

    Checkpoint ck;
    ck.meta = header.at("meta");
    for (const auto& g : header.at("groups")) {
        ParameterSet set;
        for (const auto& s : g.at("shapes")) {
            Tensor t(s.get<Shape>());
            for (auto& v : t.values()) v = take<double>(in);
            set.push_back(std::move(t));
        }
        ck.groups.emplace_back(g.at("name").get<std::string>(), std::move(set));
    }
    if (!in.empty()) throw std::runtime_error("trailing bytes after checkpoint payload");
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    const auto bytes = serialize(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace vrls::nn
