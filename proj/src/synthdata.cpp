#include "asgdro/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "asgdro/errors.hpp"

namespace asgdro::data {

namespace {

using nlohmann::json;

enum class Source { Class, Attribute, Neutral };

struct Block {
    std::size_t dims;
    double margin;
    double std;
    Source source;
};

struct Entry {
    std::size_t label;
    std::size_t attribute;
    std::size_t digit;  // class that drives the invariant blocks
};

std::mt19937_64 split_rng(std::uint64_t seed, std::uint32_t split_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), split_id};
    return std::mt19937_64(seq);
}

std::vector<std::size_t> balanced_counts(std::size_t n) {
    std::vector<std::size_t> c(4, n / 4);
    for (std::size_t g = 0; g < n % 4; ++g) ++c[g];
    return c;
}

GroupedDataset build_split(const std::vector<std::size_t>& counts, double label_noise,
                           const std::vector<Block>& blocks, const std::vector<std::string>& names,
                           std::mt19937_64 rng, const char* split_name) {
    for (std::size_t g = 0; g < counts.size(); ++g)
        if (counts[g] == 0)
            throw InfeasibleSpec(std::string("group ") + names[g] + " would be empty in the " + split_name + " split");

    std::vector<Entry> entries;
    for (std::size_t g = 0; g < counts.size(); ++g) {
        const std::size_t y = g / 2;
        const std::size_t a = g % 2;
        const auto noisy = static_cast<std::size_t>(std::llround(label_noise * static_cast<double>(counts[g])));
        for (std::size_t k = 0; k < counts[g]; ++k) entries.push_back({y, a, k < noisy ? 1 - y : y});
    }
    std::shuffle(entries.begin(), entries.end(), rng);

    std::size_t dim = 0;
    for (const auto& b : blocks) dim += b.dims;

    GroupedDataset ds;
    ds.group_names = names;
    ds.inputs = Matrix(entries.size(), dim);
    ds.labels.reserve(entries.size());
    ds.groups.reserve(entries.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t r = 0; r < entries.size(); ++r) {
        const auto& e = entries[r];
        auto row = ds.inputs.row(r);
        std::size_t col = 0;
        for (const auto& b : blocks) {
            double center = 0.0;  // a removed block sits at the neutral midpoint
            switch (b.source) {
                case Source::Class: center = e.digit == 1 ? b.margin : -b.margin; break;
                case Source::Attribute: center = e.attribute == 1 ? b.margin : -b.margin; break;
                case Source::Neutral: break;
            }
            for (std::size_t k = 0; k < b.dims; ++k) row[col++] = center + b.std * normal(rng);
        }
        ds.labels.push_back(e.label);
        ds.groups.push_back(2 * e.label + e.attribute);
    }
    return ds;
}

json spec_json(const ShiftSpec& s) {
    return json{{"n_train", s.n_train},
                {"n_val", s.n_val},
                {"n_test", s.n_test},
                {"spurious_ratio_train", s.spurious_ratio_train},
                {"spurious_ratio_test", s.spurious_ratio_test},
                {"label_noise", s.label_noise},
                {"d_strong_inv", s.d_strong_inv},
                {"d_weak_inv", s.d_weak_inv},
                {"d_spurious", s.d_spurious},
                {"strong_margin", s.strong_margin},
                {"weak_margin", s.weak_margin},
                {"spurious_margin", s.spurious_margin},
                {"noise_std", s.noise_std},
                {"strong_noise_std", s.strong_noise_std},
                {"weak_noise_scale", s.weak_noise_scale},
                {"seed", s.seed}};
}

ShiftSpec spec_from(const json& j) {
    ShiftSpec s;
    s.n_train = j.value("n_train", s.n_train);
    s.n_val = j.value("n_val", s.n_val);
    s.n_test = j.value("n_test", s.n_test);
    s.spurious_ratio_train = j.value("spurious_ratio_train", s.spurious_ratio_train);
    s.spurious_ratio_test = j.value("spurious_ratio_test", s.spurious_ratio_test);
    s.label_noise = j.value("label_noise", s.label_noise);
    s.d_strong_inv = j.value("d_strong_inv", s.d_strong_inv);
    s.d_weak_inv = j.value("d_weak_inv", s.d_weak_inv);
    s.d_spurious = j.value("d_spurious", s.d_spurious);
    s.strong_margin = j.value("strong_margin", s.strong_margin);
    s.weak_margin = j.value("weak_margin", s.weak_margin);
    s.spurious_margin = j.value("spurious_margin", s.spurious_margin);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.strong_noise_std = j.value("strong_noise_std", s.strong_noise_std);
    s.weak_noise_scale = j.value("weak_noise_scale", s.weak_noise_scale);
    s.seed = j.value("seed", s.seed);
    return s;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::size_t> GroupedDataset::group_counts() const {
    std::vector<std::size_t> c(num_groups(), 0);
    for (auto g : groups) ++c[g];
    return c;
}

Batch GroupedDataset::group_batch(std::size_t g) const {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < size(); ++r)
        if (groups[r] == g) rows.push_back(r);
    if (rows.empty()) throw EmptyGroupError("group " + std::to_string(g) + " has no examples");
    return gather(*this, rows).batch;
}

Batch GroupedDataset::as_batch() const {
    Batch b;
    b.inputs = inputs;
    b.labels = labels;
    return b;
}

void GroupedDataset::require_all_groups() const {
    const auto c = group_counts();
    for (std::size_t g = 0; g < c.size(); ++g)
        if (c[g] == 0) throw EmptyGroupError("group " + std::to_string(g) + " has no examples");
}

void GroupedDataset::validate() const {
    if (inputs.rows != labels.size() || groups.size() != labels.size())
        throw ShapeError("dataset columns differ in length");
    for (auto g : groups)
        if (g >= num_groups()) throw ShapeError("group index out of range");
}

void ShiftSpec::validate() const {
    auto in_open_unit = [](double r) { return r > 0.0 && r < 1.0; };
    if (n_train == 0 || n_val == 0 || n_test == 0) throw std::invalid_argument("split sizes must be positive");
    if (!in_open_unit(spurious_ratio_train) || !in_open_unit(spurious_ratio_test))
        throw std::invalid_argument("spurious ratios must lie in (0, 1)");
    if (!(label_noise >= 0.0 && label_noise < 1.0)) throw std::invalid_argument("label_noise must lie in [0, 1)");
    if (!(strong_margin > 0.0) || !(weak_margin > 0.0) || !(spurious_margin > 0.0))
        throw std::invalid_argument("margins must be positive");
    if (!(noise_std > 0.0) || !(strong_noise_std > 0.0) || !(weak_noise_scale > 0.0))
        throw std::invalid_argument("noise levels must be positive");
    if (d_strong_inv == 0 || d_spurious == 0) throw std::invalid_argument("feature blocks must be nonempty");
}

ShiftSpec ShiftSpec::cmnist_defaults() {
    ShiftSpec s;
    s.spurious_ratio_train = 0.8;
    s.spurious_ratio_test = 0.1;
    s.label_noise = 0.25;
    s.strong_noise_std = 1.0;
    return s;
}

ShiftSpec ShiftSpec::hcmnist_defaults() { return ShiftSpec{}; }

std::vector<std::size_t> group_counts_for(std::size_t n, double match_ratio) {
    const std::size_t c0 = (n + 1) / 2;
    const std::size_t c1 = n / 2;
    const auto m0 = static_cast<std::size_t>(std::llround(static_cast<double>(c0) * match_ratio));
    const auto m1 = static_cast<std::size_t>(std::llround(static_cast<double>(c1) * match_ratio));
    // group = 2 * class + attribute; attribute == class is the matching pair
    return {m0, c0 - m0, c1 - m1, m1};
}

Splits gen_cmnist_proxy(const ShiftSpec& spec) {
    spec.validate();
    const std::vector<std::string> names{"class0/red", "class0/green", "class1/red", "class1/green"};
    const std::vector<Block> blocks{{spec.d_strong_inv, spec.strong_margin, spec.strong_noise_std, Source::Class},
                                    {spec.d_spurious, spec.spurious_margin, spec.noise_std, Source::Attribute}};
    Splits s;
    s.train = build_split(group_counts_for(spec.n_train, spec.spurious_ratio_train), spec.label_noise, blocks, names,
                          split_rng(spec.seed, 1), "train");
    s.val = build_split(balanced_counts(spec.n_val), 0.0, blocks, names, split_rng(spec.seed, 2), "val");
    s.tests.emplace_back("test", build_split(group_counts_for(spec.n_test, spec.spurious_ratio_test), 0.0, blocks,
                                             names, split_rng(spec.seed, 3), "test"));
    return s;
}

Splits gen_hcmnist_proxy(const ShiftSpec& spec) {
    spec.validate();
    if (spec.label_noise != 0.0) throw std::invalid_argument("the H-CMNIST proxy has no label noise");
    if (spec.d_weak_inv == 0) throw std::invalid_argument("weak-invariant block must be nonempty");
    const std::vector<std::string> names{"class0/top-left", "class0/bottom-right", "class1/top-left",
                                         "class1/bottom-right"};
    auto blocks_for = [&](bool strong_on, bool spurious_on) {
        return std::vector<Block>{
            {spec.d_strong_inv, spec.strong_margin, spec.strong_noise_std, strong_on ? Source::Class : Source::Neutral},
            {spec.d_weak_inv, spec.weak_margin, spec.noise_std * spec.weak_noise_scale, Source::Class},
            {spec.d_spurious, spec.spurious_margin, spec.noise_std,
             spurious_on ? Source::Attribute : Source::Neutral}};
    };
    Splits s;
    s.train = build_split(group_counts_for(spec.n_train, spec.spurious_ratio_train), 0.0, blocks_for(true, true),
                          names, split_rng(spec.seed, 1), "train");
    s.val = build_split(balanced_counts(spec.n_val), 0.0, blocks_for(true, true), names, split_rng(spec.seed, 2),
                        "val");
    const auto test_counts = group_counts_for(spec.n_test, spec.spurious_ratio_test);
    s.tests.emplace_back(kTestBed1SpuInv, build_split(test_counts, 0.0, blocks_for(true, true), names,
                                                      split_rng(spec.seed, 3), "test"));
    s.tests.emplace_back(kTestBed1Inv, build_split(test_counts, 0.0, blocks_for(true, false), names,
                                                   split_rng(spec.seed, 4), "test"));
    s.tests.emplace_back(kTestBed2SpuShape, build_split(test_counts, 0.0, blocks_for(false, true), names,
                                                        split_rng(spec.seed, 5), "test"));
    s.tests.emplace_back(kTestBed2Shape, build_split(test_counts, 0.0, blocks_for(false, false), names,
                                                     split_rng(spec.seed, 6), "test"));
    return s;
}

GroupedBatch gather(const GroupedDataset& ds, const std::vector<std::size_t>& rows) {
    GroupedBatch gb;
    gb.batch.inputs = Matrix(rows.size(), ds.dim());
    gb.batch.labels.reserve(rows.size());
    gb.groups.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto src = ds.inputs.row(rows[k]);
        std::copy(src.begin(), src.end(), gb.batch.inputs.row(k).begin());
        gb.batch.labels.push_back(ds.labels[rows[k]]);
        gb.groups.push_back(ds.groups[rows[k]]);
    }
    return gb;
}

std::vector<Batch> split_by_group(const GroupedBatch& gb, std::size_t num_groups) {
    std::vector<std::vector<std::size_t>> rows(num_groups);
    for (std::size_t r = 0; r < gb.groups.size(); ++r) rows.at(gb.groups[r]).push_back(r);
    std::vector<Batch> out(num_groups);
    const std::size_t cols = gb.batch.inputs.cols;
    for (std::size_t g = 0; g < num_groups; ++g) {
        if (rows[g].empty()) throw EmptyGroupError("group " + std::to_string(g) + " missing from batch");
        out[g].inputs = Matrix(rows[g].size(), cols);
        for (std::size_t k = 0; k < rows[g].size(); ++k) {
            const auto src = gb.batch.inputs.row(rows[g][k]);
            std::copy(src.begin(), src.end(), out[g].inputs.row(k).begin());
            out[g].labels.push_back(gb.batch.labels[rows[g][k]]);
            if (!gb.batch.sample_weights.empty()) out[g].sample_weights.push_back(gb.batch.sample_weights[rows[g][k]]);
        }
    }
    return out;
}

ReweightedBatchStream::ReweightedBatchStream(const GroupedDataset& ds, std::size_t batch_size, std::uint64_t seed)
    : ds_(&ds), members_(ds.num_groups()), rng_(seed) {
    const std::size_t groups = ds.num_groups();
    if (groups == 0 || batch_size < groups) throw std::invalid_argument("batch size must be at least the group count");
    for (std::size_t r = 0; r < ds.size(); ++r) members_[ds.groups[r]].push_back(r);
    for (std::size_t g = 0; g < groups; ++g)
        if (members_[g].empty()) throw EmptyGroupError("group " + std::to_string(g) + " has no examples");
    quota_.assign(groups, batch_size / groups);
    for (std::size_t g = 0; g < batch_size % groups; ++g) ++quota_[g];
}

GroupedBatch ReweightedBatchStream::next() {
    std::vector<std::size_t> rows;
    for (std::size_t g = 0; g < members_.size(); ++g) {
        std::uniform_int_distribution<std::size_t> pick(0, members_[g].size() - 1);
        for (std::size_t k = 0; k < quota_[g]; ++k) rows.push_back(members_[g][pick(rng_)]);
    }
    return gather(*ds_, rows);
}

ShuffledBatchStream::ShuffledBatchStream(const GroupedDataset& ds, std::size_t batch_size, std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), order_(ds.size()), rng_(seed) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (ds.size() == 0) throw std::invalid_argument("empty dataset");
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
}

GroupedBatch ShuffledBatchStream::next() {
    if (cursor_ >= order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                  order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return gather(*ds_, rows);
}

GroupAccuracy worst_group_accuracy(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                                   const std::vector<std::size_t>& groups, std::size_t num_groups) {
    if (preds.size() != labels.size() || groups.size() != labels.size())
        throw ShapeError("predictions, labels and groups differ in length");
    std::vector<std::size_t> correct(num_groups, 0), total(num_groups, 0);
    std::size_t all_correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (groups[i] >= num_groups) throw ShapeError("group index out of range");
        ++total[groups[i]];
        if (preds[i] == labels[i]) {
            ++correct[groups[i]];
            ++all_correct;
        }
    }
    GroupAccuracy acc;
    acc.per_group.resize(num_groups);
    acc.worst = 1.0;
    for (std::size_t g = 0; g < num_groups; ++g) {
        if (total[g] == 0) throw EmptyGroupError("group " + std::to_string(g) + " is empty in the evaluated split");
        acc.per_group[g] = static_cast<double>(correct[g]) / static_cast<double>(total[g]);
        acc.worst = std::min(acc.worst, acc.per_group[g]);
    }
    acc.average = static_cast<double>(all_correct) / static_cast<double>(preds.size());
    return acc;
}

void save_dataset_csv(const GroupedDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t k = 0; k < ds.dim(); ++k) out << 'x' << k << ',';
    out << "label,group\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.inputs.row(r)) out << format_double(v) << ',';
        out << ds.labels[r] << ',' << ds.groups[r] << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

GroupedDataset load_dataset_csv(const std::filesystem::path& path, std::vector<std::string> group_names) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path.string());
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 3) throw std::runtime_error("dataset header needs features, label and group");
    const std::size_t dim = columns - 2;

    std::vector<double> values;
    GroupedDataset ds;
    std::size_t max_group = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col < dim) {
                values.push_back(std::strtod(cell.c_str(), nullptr));
            } else if (col == dim) {
                ds.labels.push_back(std::stoul(cell));
            } else if (col == dim + 1) {
                ds.groups.push_back(std::stoul(cell));
                max_group = std::max(max_group, ds.groups.back());
            }
            ++col;
        }
        if (col != columns) throw std::runtime_error("ragged row in " + path.string());
    }
    ds.inputs.rows = ds.labels.size();
    ds.inputs.cols = dim;
    ds.inputs.data = std::move(values);
    if (group_names.empty())
        for (std::size_t g = 0; g <= max_group && !ds.groups.empty(); ++g) group_names.push_back("group" + std::to_string(g));
    ds.group_names = std::move(group_names);
    ds.validate();
    return ds;
}

std::string shift_spec_to_json(const ShiftSpec& spec) { return spec_json(spec).dump(2); }

ShiftSpec shift_spec_from_json(const std::string& text) { return spec_from(json::parse(text)); }

void save_splits(const Splits& splits, const ShiftSpec& spec, const std::string& kind,
                 const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json side;
    side["kind"] = kind;
    side["shift_spec"] = spec_json(spec);
    side["group_names"] = splits.train.group_names;
    std::vector<std::string> test_names;
    save_dataset_csv(splits.train, dir / "train.csv");
    save_dataset_csv(splits.val, dir / "val.csv");
    for (const auto& [name, ds] : splits.tests) {
        save_dataset_csv(ds, dir / (name + ".csv"));
        test_names.push_back(name);
    }
    side["tests"] = test_names;
    std::ofstream out(dir / "dataset.json");
    out << side.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + (dir / "dataset.json").string());
}

Splits load_splits(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw std::runtime_error("missing " + (dir / "dataset.json").string());
    const json side = json::parse(in);
    const auto names = side.at("group_names").get<std::vector<std::string>>();
    Splits s;
    s.train = load_dataset_csv(dir / "train.csv", names);
    s.val = load_dataset_csv(dir / "val.csv", names);
    for (const auto& t : side.at("tests")) {
        const auto name = t.get<std::string>();
        s.tests.emplace_back(name, load_dataset_csv(dir / (name + ".csv"), names));
    }
    return s;
}

}  // namespace asgdro::data
