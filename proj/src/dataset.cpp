#include "mdmt/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace mdmt {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, delim)) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == delim) cells.emplace_back();
    return cells;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& text, std::size_t line_no, const std::string& column)
{
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || text.empty())
        throw Error("non-numeric expression cell '" + text + "' at line " +
                    std::to_string(line_no) + ", column '" + column + "'");
    return value;
}

void check_index_set(const std::vector<std::size_t>& set, std::size_t d, const char* name)
{
    for (auto i : set)
        if (i >= d)
            throw Error(std::string("planted index ") + std::to_string(i) + " in " + name +
                        " is outside [0, " + std::to_string(d) + ")");
}

} // namespace

void ExpressionDataset::validate() const
{
    require(samples.cols() >= 1, "dataset '" + domain_id + "' has no features");
    require(samples.rows() >= 2, "dataset '" + domain_id + "' needs at least two samples");
    require(features.size() == d(), "feature list length does not match matrix width");
    require(labels.size() == n(), "label count does not match sample count");
    require(sample_ids.empty() || sample_ids.size() == n(), "sample id count mismatch");
    bool seen[2] = {false, false};
    for (int y : labels) {
        require(y == 0 || y == 1, "labels must be 0 or 1");
        seen[y] = true;
    }
    require(seen[0] && seen[1], "single-class dataset '" + domain_id + "'");
    std::set<std::string> unique(features.begin(), features.end());
    require(unique.size() == features.size(), "duplicate feature in dataset '" + domain_id + "'");
}

void SyntheticSpec::validate() const
{
    require(d >= 1, "synthetic d must be at least 1");
    require(n_a >= 2 && n_b >= 2, "synthetic sample counts must be at least 2");
    check_index_set(planted_shared, d, "planted_shared");
    check_index_set(planted_a_only, d, "planted_a_only");
    check_index_set(planted_b_only, d, "planted_b_only");

    std::map<std::size_t, std::string> owner;
    auto claim = [&](const std::vector<std::size_t>& set, const std::string& name) {
        for (auto i : set) {
            auto [it, inserted] = owner.emplace(i, name);
            if (!inserted)
                throw Error("overlapping planted sets: feature " + std::to_string(i) +
                            " is in both " + it->second + " and " + name);
        }
    };
    claim(planted_shared, "planted_shared");
    claim(planted_a_only, "planted_a_only");
    claim(planted_b_only, "planted_b_only");
}

ExpressionDataset load_dataset(const std::filesystem::path& path, const std::string& domain_id,
                               const std::string& label_column)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file '" + path.string() + "'");

    std::string header;
    if (!std::getline(in, header)) throw Error("dataset file '" + path.string() + "' is empty");
    const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

    auto columns = split_line(header, delim);
    for (auto& c : columns) c = trim(c);
    require(columns.size() >= 3, "dataset needs a sample-id column, a label column and features");

    std::size_t label_at = columns.size();
    for (std::size_t c = 1; c < columns.size(); ++c)
        if (columns[c] == label_column) label_at = c;
    require(label_at != columns.size(), "label column '" + label_column + "' not found");

    ExpressionDataset data;
    data.domain_id = domain_id;
    std::vector<std::size_t> feature_columns;
    for (std::size_t c = 1; c < columns.size(); ++c) {
        if (c == label_at) continue;
        feature_columns.push_back(c);
        data.features.push_back(columns[c]);
    }
    {
        std::set<std::string> seen;
        for (const auto& f : data.features)
            if (!seen.insert(f).second) throw Error("duplicate feature '" + f + "'");
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_line(line, delim);
        if (cells.size() != columns.size())
            throw Error("ragged row at line " + std::to_string(line_no) + ": expected " +
                        std::to_string(columns.size()) + " cells, got " +
                        std::to_string(cells.size()));
        data.sample_ids.push_back(trim(cells[0]));
        raw_labels.push_back(trim(cells[label_at]));
        std::vector<double> row;
        row.reserve(feature_columns.size());
        for (auto c : feature_columns) row.push_back(parse_cell(trim(cells[c]), line_no, columns[c]));
        rows.push_back(std::move(row));
    }

    std::set<std::string> classes(raw_labels.begin(), raw_labels.end());
    if (classes.size() < 2) throw Error("single-class dataset '" + path.string() + "'");
    if (classes.size() > 2)
        throw Error("label column '" + label_column + "' has " + std::to_string(classes.size()) +
                    " classes; exactly two are required");
    data.class_names = {*classes.begin(), *std::next(classes.begin())};

    data.samples.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(feature_columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            data.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    for (const auto& l : raw_labels) data.labels.push_back(l == data.class_names[0] ? 0 : 1);

    data.validate();
    return data;
}

void write_dataset(const ExpressionDataset& data, const std::filesystem::path& path,
                   const std::string& label_column)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file '" + path.string() + "'");
    out << "sample," << label_column;
    for (const auto& f : data.features) out << ',' << f;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < data.n(); ++i) {
        out << (data.sample_ids.empty() ? "s" + std::to_string(i) : data.sample_ids[i]) << ','
            << data.class_names[static_cast<std::size_t>(data.labels[i])];
        for (std::size_t j = 0; j < data.d(); ++j)
            out << ',' << data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out << '\n';
    }
}

namespace {

ExpressionDataset restrict_columns(const ExpressionDataset& data,
                                   const std::vector<std::string>& keep)
{
    std::map<std::string, Eigen::Index> where;
    for (std::size_t j = 0; j < data.features.size(); ++j)
        where[data.features[j]] = static_cast<Eigen::Index>(j);

    ExpressionDataset out = data;
    out.features = keep;
    out.samples.resize(data.samples.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        out.samples.col(static_cast<Eigen::Index>(j)) = data.samples.col(where.at(keep[j]));
    return out;
}

} // namespace

PairedDomainData align_domains(const ExpressionDataset& a, const ExpressionDataset& b)
{
    std::vector<std::string> fa = a.features, fb = b.features;
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    std::vector<std::string> shared;
    std::set_intersection(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(shared));
    require(!shared.empty(), "domains '" + a.domain_id + "' and '" + b.domain_id +
                                 "' share no features");
    require(a.class_names == b.class_names,
            "class names differ across domains: (" + a.class_names[0] + ", " + a.class_names[1] +
                ") vs (" + b.class_names[0] + ", " + b.class_names[1] + ")");

    PairedDomainData p;
    p.domain_a = restrict_columns(a, shared);
    p.domain_b = restrict_columns(b, shared);
    p.shared_features = std::move(shared);
    return p;
}

ExpressionDataset zscore(const ExpressionDataset& data)
{
    ExpressionDataset out = data;
    const double n = static_cast<double>(data.n());
    for (Eigen::Index j = 0; j < out.samples.cols(); ++j) {
        auto col = out.samples.col(j);
        const double mean = col.sum() / n;
        const double var = (col.array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        // Constant columns may show rounding noise of order eps * |mean|.
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
            col.setZero();
        else
            col = (col.array() - mean) / sd;
    }
    return out;
}

PairedDomainData zscore_per_domain(const PairedDomainData& p)
{
    PairedDomainData out;
    out.domain_a = zscore(p.domain_a);
    out.domain_b = zscore(p.domain_b);
    out.shared_features = p.shared_features;
    return out;
}

DomainBatch sample_batch(const ExpressionDataset& data, std::size_t batch_size, Rng& rng)
{
    require(batch_size >= 1, "batch_size must be at least 1");
    std::uniform_int_distribution<std::size_t> pick(0, data.n() - 1);
    DomainBatch batch;
    batch.x.resize(static_cast<Eigen::Index>(batch_size), data.samples.cols());
    batch.y.resize(batch_size);
    for (std::size_t r = 0; r < batch_size; ++r) {
        const auto i = pick(rng);
        batch.x.row(static_cast<Eigen::Index>(r)) = data.samples.row(static_cast<Eigen::Index>(i));
        batch.y[r] = data.labels[i];
    }
    return batch;
}

BatchPair sample_batch_pair(const PairedDomainData& p, std::size_t batch_size, Rng& rng)
{
    BatchPair pair;
    pair.a = sample_batch(p.domain_a, batch_size, rng);
    pair.b = sample_batch(p.domain_b, batch_size, rng);
    return pair;
}

ExpressionDataset subsample_dataset(const ExpressionDataset& data, double fraction, Rng& rng,
                                    std::vector<std::size_t>* retained)
{
    require(fraction > 0.0 && fraction <= 1.0, "subsample fraction must lie in (0, 1]");

    std::vector<std::size_t> keep;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.n(); ++i)
            if (data.labels[i] == cls) members.push_back(i);
        // Guard against 0.85 * 20 evaluating to 17.000000000000004.
        const double target = fraction * static_cast<double>(members.size());
        auto count = static_cast<std::size_t>(std::ceil(target - 1e-9));
        count = std::clamp<std::size_t>(count, 1, members.size());
        std::shuffle(members.begin(), members.end(), rng);
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<long>(count));
    }
    std::sort(keep.begin(), keep.end());

    ExpressionDataset out;
    out.domain_id = data.domain_id;
    out.features = data.features;
    out.class_names = data.class_names;
    out.samples.resize(static_cast<Eigen::Index>(keep.size()), data.samples.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.samples.row(static_cast<Eigen::Index>(r)) =
            data.samples.row(static_cast<Eigen::Index>(keep[r]));
        out.labels.push_back(data.labels[keep[r]]);
        if (!data.sample_ids.empty()) out.sample_ids.push_back(data.sample_ids[keep[r]]);
    }
    if (retained) *retained = keep;
    return out;
}

std::pair<PairedDomainData, RetainedIndices> subsample(const PairedDomainData& p, double fraction,
                                                       Rng& rng)
{
    RetainedIndices record;
    record.per_domain.resize(2);
    PairedDomainData out;
    out.shared_features = p.shared_features;
    out.domain_a = subsample_dataset(p.domain_a, fraction, rng, &record.per_domain[0]);
    out.domain_b = subsample_dataset(p.domain_b, fraction, rng, &record.per_domain[1]);
    return {std::move(out), std::move(record)};
}

std::string synthetic_feature_name(std::size_t index, std::size_t d)
{
    const auto width = std::to_string(d > 0 ? d - 1 : 0).size();
    std::string digits = std::to_string(index);
    return "g" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

namespace {

ExpressionDataset synth_domain(const SyntheticSpec& spec, const std::string& id, std::size_t n,
                               const std::vector<std::size_t>& single, Rng& rng)
{
    ExpressionDataset data;
    data.domain_id = id;
    data.class_names = {"neg", "pos"};
    for (std::size_t j = 0; j < spec.d; ++j) data.features.push_back(synthetic_feature_name(j, spec.d));

    std::normal_distribution<double> noise(0.0, 1.0);
    data.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.d));
    for (std::size_t i = 0; i < n; ++i) {
        data.labels.push_back(static_cast<int>(i % 2));
        data.sample_ids.push_back(id + "_s" + std::to_string(i));
        for (std::size_t j = 0; j < spec.d; ++j)
            data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = noise(rng);
    }

    auto shift = [&](const std::vector<std::size_t>& cols, double effect) {
        for (auto j : cols)
            for (std::size_t i = 0; i < n; ++i)
                data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    (data.labels[i] == 1 ? 0.5 : -0.5) * effect;
    };
    shift(spec.planted_shared, spec.effect_size_shared);
    shift(single, spec.effect_size_single);
    return data;
}

} // namespace

PairedDomainData generate_synthetic(const SyntheticSpec& spec)
{
    spec.validate();
    Rng rng(spec.noise_seed);
    PairedDomainData p;
    p.domain_a = synth_domain(spec, "a", spec.n_a, spec.planted_a_only, rng);
    p.domain_b = synth_domain(spec, "b", spec.n_b, spec.planted_b_only, rng);
    p.shared_features = p.domain_a.features;
    return p;
}

void write_ground_truth(const SyntheticSpec& spec, const std::filesystem::path& path)
{
    auto names = [&](const std::vector<std::size_t>& set) {
        std::vector<std::string> out;
        for (auto i : set) out.push_back(synthetic_feature_name(i, spec.d));
        return out;
    };
    nlohmann::json j;
    j["d"] = spec.d;
    j["n_a"] = spec.n_a;
    j["n_b"] = spec.n_b;
    j["planted_shared"] = spec.planted_shared;
    j["planted_a_only"] = spec.planted_a_only;
    j["planted_b_only"] = spec.planted_b_only;
    j["effect_size_shared"] = spec.effect_size_shared;
    j["effect_size_single"] = spec.effect_size_single;
    j["noise_seed"] = spec.noise_seed;
    j["feature_ids"] = {{"planted_shared", names(spec.planted_shared)},
                        {"planted_a_only", names(spec.planted_a_only)},
                        {"planted_b_only", names(spec.planted_b_only)}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write ground truth '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

SyntheticSpec read_ground_truth(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open ground truth '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed ground truth '" + path.string() + "': " + e.what());
    }
    SyntheticSpec spec;
    spec.d = j.at("d").get<std::size_t>();
    spec.n_a = j.at("n_a").get<std::size_t>();
    spec.n_b = j.at("n_b").get<std::size_t>();
    spec.planted_shared = j.at("planted_shared").get<std::vector<std::size_t>>();
    spec.planted_a_only = j.at("planted_a_only").get<std::vector<std::size_t>>();
    spec.planted_b_only = j.at("planted_b_only").get<std::vector<std::size_t>>();
    spec.effect_size_shared = j.at("effect_size_shared").get<double>();
    spec.effect_size_single = j.at("effect_size_single").get<double>();
    spec.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    return spec;
}

} // namespace mdmt
