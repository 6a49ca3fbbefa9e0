#include "mdmt/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace mdmt {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'M', 'T', 'C', 'K', 'P', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class A>
NamedArray flatten(const std::string& name, const A& a)
{
    NamedArray out{name, static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()), {}};
    out.data.reserve(out.rows * out.cols);
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) out.data.push_back(static_cast<double>(a(r, c)));
    return out;
}

template <class A>
void unflatten(const NamedArray& src, A& a)
{
    if (src.rows != static_cast<std::size_t>(a.rows()) || src.cols != static_cast<std::size_t>(a.cols()))
        throw Error("checkpoint array '" + src.name + "' has shape [" + std::to_string(src.rows) +
                    ", " + std::to_string(src.cols) + "], model expects [" +
                    std::to_string(a.rows()) + ", " + std::to_string(a.cols()) + "]");
    using S = typename A::Scalar;
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = static_cast<S>(src.data[i++]);
}

nlohmann::json config_json(const ModelConfig& c)
{
    return {{"d", c.d},           {"hidden", c.hidden},           {"latent", c.latent},
            {"classifier_depth", c.classifier_depth}, {"domains", c.domains},
            {"bn_momentum", c.bn_momentum},           {"bn_eps", c.bn_eps}};
}

ModelConfig config_from_json(const nlohmann::json& j)
{
    ModelConfig c;
    c.d = j.at("d").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.latent = j.at("latent").get<std::size_t>();
    c.classifier_depth = j.at("classifier_depth").get<std::size_t>();
    c.domains = j.at("domains").get<std::size_t>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_eps = j.at("bn_eps").get<double>();
    return c;
}

} // namespace

const NamedArray& Checkpoint::find(const std::string& name) const
{
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw Error("checkpoint has no array '" + name + "'");
}

template <typename T>
Checkpoint to_checkpoint(const ModelState<T>& model)
{
    Checkpoint ckpt;
    ckpt.config = model.config;
    ckpt.seed = model.seed;
    ckpt.precision = sizeof(T) == sizeof(float) ? "float32" : "float64";
    ModelParams<T>::zip([&](const std::string& name, const auto& a) {
        ckpt.arrays.push_back(flatten(name, a));
    }, "", model.params);
    for (std::size_t k = 0; k < model.stats.size(); ++k)
        VaeStats<T>::zip([&](const std::string& name, const auto& a) {
            ckpt.arrays.push_back(flatten(name, a));
        }, "stats.vae" + std::to_string(k) + ".", model.stats[k]);
    return ckpt;
}

template <typename T>
ModelState<T> from_checkpoint(const Checkpoint& ckpt)
{
    ModelState<T> model = init_model<T>(ckpt.config, ckpt.seed);
    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : ckpt.arrays) by_name[a.name] = &a;
    auto load = [&](const std::string& name, auto& a) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error("checkpoint is missing array '" + name + "'");
        unflatten(*it->second, a);
    };
    ModelParams<T>::zip(load, "", model.params);
    for (std::size_t k = 0; k < model.stats.size(); ++k)
        VaeStats<T>::zip(load, "stats.vae" + std::to_string(k) + ".", model.stats[k]);
    model.mode = Mode::inference;
    return model;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    nlohmann::json header;
    header["seed"] = ckpt.seed;
    header["precision"] = ckpt.precision;
    header["config"] = config_json(ckpt.config);
    header["metadata"] = nlohmann::json::parse(ckpt.metadata_json);
    header["arrays"] = nlohmann::json::array();
    for (const auto& a : ckpt.arrays)
        header["arrays"].push_back({{"name", a.name}, {"shape", {a.rows, a.cols}}});
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ckpt.arrays)
        out.write(reinterpret_cast<const char*>(a.data.data()),
                  static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw Error("'" + path.string() + "' is not a checkpoint file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (1u << 30)) throw Error("corrupt checkpoint header in '" + path.string() + "'");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.precision = header.at("precision").get<std::string>();
        ckpt.config = config_from_json(header.at("config"));
        ckpt.metadata_json = header.value("metadata", nlohmann::json::object()).dump();
        for (const auto& a : header.at("arrays")) {
            NamedArray arr;
            arr.name = a.at("name").get<std::string>();
            arr.rows = a.at("shape").at(0).get<std::size_t>();
            arr.cols = a.at("shape").at(1).get<std::size_t>();
            ckpt.arrays.push_back(std::move(arr));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt checkpoint header in '" + path.string() + "': " + e.what());
    }
    for (auto& a : ckpt.arrays) {
        a.data.resize(a.rows * a.cols);
        in.read(reinterpret_cast<char*>(a.data.data()),
                static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        if (!in) throw Error("truncated checkpoint '" + path.string() + "'");
    }
    return ckpt;
}

template Checkpoint to_checkpoint(const ModelState<float>&);
template Checkpoint to_checkpoint(const ModelState<double>&);
template ModelState<float> from_checkpoint(const Checkpoint&);
template ModelState<double> from_checkpoint(const Checkpoint&);

} // namespace mdmt
