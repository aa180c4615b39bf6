#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "asgdro/diffcore.hpp"

namespace asgdro::data {

// Labeled feature vectors, each tagged with a (class, attribute) group.
struct GroupedDataset {
    Matrix inputs;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> groups;
    std::vector<std::string> group_names;

    std::size_t size() const { return labels.size(); }
    std::size_t num_groups() const { return group_names.size(); }
    std::size_t dim() const { return inputs.cols; }

    std::vector<std::size_t> group_counts() const;
    // Examples of one group, unit weights.
    Batch group_batch(std::size_t g) const;
    Batch as_batch() const;
    // Throws EmptyGroupError if a declared group has no example.
    void require_all_groups() const;
    void validate() const;
};

struct ShiftSpec {
    std::size_t n_train = 10000;
    std::size_t n_val = 2000;
    std::size_t n_test = 2000;
    // Probability that the attribute agrees with the class.
    double spurious_ratio_train = 0.95;
    double spurious_ratio_test = 0.05;
    double label_noise = 0.0;
    std::size_t d_strong_inv = 8;
    std::size_t d_weak_inv = 8;
    std::size_t d_spurious = 8;
    double strong_margin = 2.0;
    double weak_margin = 1.0;
    double spurious_margin = 1.0;
    double noise_std = 1.0;          // weak-invariant and spurious blocks
    double strong_noise_std = 0.5;   // strong-invariant block
    double weak_noise_scale = 2.0;   // weak block std = noise_std * weak_noise_scale
    std::uint64_t seed = 0;

    void validate() const;

    // 80/20 color correlation, 25% label noise, 90% flipped test colors.
    static ShiftSpec cmnist_defaults();
    // 95/5 box-position correlation, flipped test beds, no label noise.
    static ShiftSpec hcmnist_defaults();
};

struct Splits {
    GroupedDataset train;
    GroupedDataset val;
    std::vector<std::pair<std::string, GroupedDataset>> tests;
};

inline constexpr const char* kTestBed1SpuInv = "tb1_spu_inv";
inline constexpr const char* kTestBed1Inv = "tb1_inv";
inline constexpr const char* kTestBed2SpuShape = "tb2_spu_shape";
inline constexpr const char* kTestBed2Shape = "tb2_shape";

// Features [invariant (d_strong_inv) | spurious (d_spurious)]. Test split
// under "test".
Splits gen_cmnist_proxy(const ShiftSpec& spec);

// Features [strong invariant | weak invariant | spurious]; four test beds
// named by the kTestBed* constants.
Splits gen_hcmnist_proxy(const ShiftSpec& spec);

// Exact per-group counts used by the generators: each class gets half of n
// (class 0 takes the odd example), split by round(count * ratio) into the
// attribute-matching group. Group index = 2 * class + attribute.
std::vector<std::size_t> group_counts_for(std::size_t n, double match_ratio);

struct GroupedBatch {
    Batch batch;
    std::vector<std::size_t> groups;
};

// One Batch per group, in group order. Throws EmptyGroupError when a group
// has no example in the batch.
std::vector<Batch> split_by_group(const GroupedBatch& gb, std::size_t num_groups);

// Group-balanced sampling with replacement: floor(batch_size/|G|) examples per
// group, remainder to the lowest group indices. Single consumer; the dataset
// must outlive the stream.
class ReweightedBatchStream {
public:
    ReweightedBatchStream(const GroupedDataset& ds, std::size_t batch_size, std::uint64_t seed);
    GroupedBatch next();
    std::vector<std::size_t> per_group_quota() const { return quota_; }

private:
    const GroupedDataset* ds_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::size_t> quota_;
    std::mt19937_64 rng_;
};

// Shuffled passes without replacement; the last batch of a pass may be short.
class ShuffledBatchStream {
public:
    ShuffledBatchStream(const GroupedDataset& ds, std::size_t batch_size, std::uint64_t seed);
    GroupedBatch next();

private:
    const GroupedDataset* ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::mt19937_64 rng_;
};

GroupedBatch gather(const GroupedDataset& ds, const std::vector<std::size_t>& rows);

struct GroupAccuracy {
    double worst = 0.0;
    std::vector<double> per_group;
    double average = 0.0;  // example-weighted
};

GroupAccuracy worst_group_accuracy(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& labels,
                                   const std::vector<std::size_t>& groups, std::size_t num_groups);

// CSV with header x0..x{d-1},label,group; values written with 17 significant
// digits so they load back bit-exactly.
void save_dataset_csv(const GroupedDataset& ds, const std::filesystem::path& path);
GroupedDataset load_dataset_csv(const std::filesystem::path& path, std::vector<std::string> group_names = {});

std::string shift_spec_to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const std::string& text);

// Writes <dir>/<split>.csv for every split plus <dir>/dataset.json holding
// the generator kind, the ShiftSpec and the group names.
void save_splits(const Splits& splits, const ShiftSpec& spec, const std::string& kind,
                 const std::filesystem::path& dir);
Splits load_splits(const std::filesystem::path& dir);

}  // namespace asgdro::data
