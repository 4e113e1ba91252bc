#include "kz/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kz/errors.hpp"
#include "kz/rng.hpp"

namespace kz {

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Manifest make_manifest(std::string command, nlohmann::json inputs)
{
    Manifest m;
    m.command = std::move(command);
    m.inputs = std::move(inputs);
    m.prng = kPrngId;
    return m;
}

std::string Manifest::input_hash() const
{
    const nlohmann::json j = {{"command", command}, {"inputs", inputs}, {"version", version}, {"prng", prng}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

nlohmann::json Manifest::deterministic_json() const
{
    return {{"command", command}, {"inputs", inputs}, {"version", version}, {"prng", prng}, {"input_hash", input_hash()}};
}

nlohmann::json Manifest::to_json() const
{
    nlohmann::json j = deterministic_json();
    j["wall_seconds"] = wall_seconds ? nlohmann::json(*wall_seconds) : nlohmann::json(nullptr);
    return j;
}

std::string Manifest::csv_comment() const { return "# manifest: " + deterministic_json().dump() + "\n"; }

Manifest manifest_from_json(const nlohmann::json& j)
{
    const nlohmann::json& m = j.contains("manifest") ? j.at("manifest") : j;
    try {
        Manifest out;
        out.command = m.at("command").get<std::string>();
        out.inputs = m.at("inputs");
        out.version = m.value("version", std::string(kVersion));
        out.prng = m.value("prng", std::string(kPrngId));
        if (out.prng != kPrngId) throw InvalidInput("manifest uses PRNG '" + out.prng + "', this build has " + std::string(kPrngId));
        if (m.contains("input_hash") && m.at("input_hash").get<std::string>() != out.input_hash())
            throw InvalidInput("manifest input_hash does not match its inputs");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed manifest: ") + e.what());
    }
}

Manifest read_manifest(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open manifest file " + path);
    std::string first;
    std::getline(in, first);
    const std::string prefix = "# manifest: ";
    try {
        if (first.rfind(prefix, 0) == 0) return manifest_from_json(nlohmann::json::parse(first.substr(prefix.size())));
        std::stringstream rest;
        rest << first << '\n' << in.rdbuf();
        return manifest_from_json(nlohmann::json::parse(rest.str()));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

}  // namespace kz
