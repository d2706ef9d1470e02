#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aicl/corpus.hpp"
#include "aicl/groundtruth.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

/// Sparse hashed feature vector; entries sorted by index with no repeats.
struct FeatureVector {
    std::size_t dims = 0;
    std::vector<std::pair<std::uint32_t, double>> entries;

    double norm() const noexcept;
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

double cosine(const FeatureVector& a, const FeatureVector& b);

/// Hashed bag-of-words TF-IDF with document frequencies frozen from a training index.
/// index = fnv1a64(token) mod D, weight = tf * ln(1 + N / df), then L2-normalized.
/// Tokens absent from the training vocabulary are dropped.
class Featurizer {
public:
    /// Throws DimensionError unless `dims` is a power of two.
    Featurizer(const Bm25Index& index, std::size_t dims);

    FeatureVector operator()(std::string_view text) const;
    std::size_t dims() const noexcept { return dims_; }

private:
    std::size_t dims_;
    double num_docs_;
    std::unordered_map<std::string, std::uint32_t> df_;
};

struct TrainingExample {
    FeatureVector x;
    std::size_t label = 0;
    double weight = 1.0;
};

struct KHyperParams {
    double lr = 0.1;
    std::size_t epochs = 10;
    std::size_t batch = 64;
    double l2 = 1e-4;
    std::uint64_t seed = 13;
    bool class_weighting = false;
    /// Leave out instances no probe predicted correctly (confidence 0).
    bool drop_never_correct = false;
};

struct TrainingMeta {
    std::size_t epochs = 0;
    double lr = 0.0;
    double l2 = 0.0;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    bool class_weighting = false;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    /// Full-data objective after each epoch.
    std::vector<double> loss_trace;
    std::size_t num_examples = 0;
};

/// Softmax regression over shot counts 0..M: theta is D x (M + 1), row-major.
struct KModel {
    std::size_t D = 0;
    std::size_t M = 0;
    std::vector<double> theta;
    TrainingMeta training_meta;

    std::size_t num_classes() const noexcept { return M + 1; }
    double at(std::size_t row, std::size_t col) const { return theta[row * num_classes() + col]; }
};

/// Mean weighted cross-entropy over `batch` plus (l2 / 2) * ||theta||^2. When `grad` is non-null
/// it receives the gradient with respect to theta (same layout).
double softmax_objective(std::span<const double> theta, std::size_t num_classes,
                         std::span<const TrainingExample> batch, double l2, std::vector<double>* grad);

/// Class logits x^T theta.
std::vector<double> logits(const KModel& model, const FeatureVector& x);

/// Mini-batch gradient descent from theta = 0 with a seeded per-epoch shuffle of `examples`
/// (taken in the given order). Throws TrainingError on fewer than num_classes examples, a
/// single class, or a non-finite / increasing loss.
KModel train_softmax(std::vector<TrainingExample> examples, std::size_t D, std::size_t M, const KHyperParams& hyper);

/// Featurizes the labeled training instances (sorted by instance id) and trains. With
/// class_weighting each example is weighted n / (classes_present * n_class).
KModel train(std::span<const KLabel> labels, const InstanceStore& train_store, const Featurizer& featurizer,
             std::size_t M, const KHyperParams& hyper);

/// argmax_k softmax(x^T theta); ties go to the smaller k. Throws DimensionError when the
/// featurizer and model dimensions differ.
std::size_t predict_k(const KModel& model, const Featurizer& featurizer, const LabeledInstance& x);
std::size_t predict_k(const KModel& model, const FeatureVector& x);

void save_model(const KModel& model, const std::filesystem::path& path);
KModel load_model(const std::filesystem::path& path);

}  // namespace aicl
