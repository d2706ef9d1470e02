#include "aicl/kpredictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "aicl/error.hpp"
#include "aicl/hashing.hpp"
#include "json_io.hpp"

namespace aicl {

namespace {

constexpr int kModelFormatVersion = 1;

void softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) {
        v /= sum;
    }
}

std::vector<double> example_logits(std::span<const double> theta, std::size_t C, const FeatureVector& x) {
    std::vector<double> z(C, 0.0);
    for (const auto& [idx, w] : x.entries) {
        const double* row = theta.data() + static_cast<std::size_t>(idx) * C;
        for (std::size_t c = 0; c < C; ++c) {
            z[c] += w * row[c];
        }
    }
    return z;
}

}  // namespace

double FeatureVector::norm() const noexcept {
    double s = 0.0;
    for (const auto& [_, w] : entries) {
        s += w * w;
    }
    return std::sqrt(s);
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    double dot = 0.0;
    auto i = a.entries.begin();
    auto j = b.entries.begin();
    while (i != a.entries.end() && j != b.entries.end()) {
        if (i->first < j->first) {
            ++i;
        } else if (j->first < i->first) {
            ++j;
        } else {
            dot += i->second * j->second;
            ++i;
            ++j;
        }
    }
    return dot / (na * nb);
}

Featurizer::Featurizer(const Bm25Index& index, std::size_t dims)
    : dims_(dims), num_docs_(static_cast<double>(index.num_docs())) {
    if (dims == 0 || (dims & (dims - 1)) != 0) {
        throw DimensionError("feature dimension must be a power of two, got " + std::to_string(dims));
    }
    if (dims > (std::size_t{1} << 31)) {
        throw DimensionError("feature dimension too large: " + std::to_string(dims));
    }
    const auto& terms = index.terms();
    df_.reserve(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        df_.emplace(terms[t], static_cast<std::uint32_t>(index.df_of(t)));
    }
}

FeatureVector Featurizer::operator()(std::string_view text) const {
    std::map<std::uint32_t, double> acc;
    std::unordered_map<std::string, std::size_t> tf;
    for (auto& t : tokenize(text)) {
        ++tf[std::move(t)];
    }
    for (const auto& [term, count] : tf) {
        const auto it = df_.find(term);
        if (it == df_.end() || it->second == 0) {
            continue;
        }
        const auto idx = static_cast<std::uint32_t>(fnv1a64(term) & (dims_ - 1));
        acc[idx] += static_cast<double>(count) * std::log(1.0 + num_docs_ / static_cast<double>(it->second));
    }
    FeatureVector v;
    v.dims = dims_;
    v.entries.assign(acc.begin(), acc.end());
    const double n = v.norm();
    if (n > 0.0) {
        for (auto& [_, w] : v.entries) {
            w /= n;
        }
    }
    return v;
}

double softmax_objective(std::span<const double> theta, std::size_t C, std::span<const TrainingExample> batch,
                         double l2, std::vector<double>* grad) {
    if (grad != nullptr) {
        grad->assign(theta.size(), 0.0);
    }
    double loss = 0.0;
    const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        auto p = example_logits(theta, C, ex.x);
        const double mx = *std::max_element(p.begin(), p.end());
        double sum = 0.0;
        for (double v : p) {
            sum += std::exp(v - mx);
        }
        loss += ex.weight * (std::log(sum) + mx - p[ex.label]) * inv_b;
        if (grad != nullptr) {
            softmax_inplace(p);
            p[ex.label] -= 1.0;
            for (const auto& [idx, w] : ex.x.entries) {
                double* g = grad->data() + static_cast<std::size_t>(idx) * C;
                for (std::size_t c = 0; c < C; ++c) {
                    g[c] += ex.weight * inv_b * w * p[c];
                }
            }
        }
    }
    double sq = 0.0;
    for (double t : theta) {
        sq += t * t;
    }
    loss += 0.5 * l2 * sq;
    if (grad != nullptr && l2 != 0.0) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            (*grad)[i] += l2 * theta[i];
        }
    }
    return loss;
}

std::vector<double> logits(const KModel& model, const FeatureVector& x) {
    return example_logits(model.theta, model.num_classes(), x);
}

KModel train_softmax(std::vector<TrainingExample> examples, std::size_t D, std::size_t M, const KHyperParams& hyper) {
    const std::size_t C = M + 1;
    if (examples.size() < C) {
        throw TrainingError("need at least " + std::to_string(C) + " labeled instances to train, got " +
                            std::to_string(examples.size()));
    }
    std::vector<std::size_t> per_class(C, 0);
    for (const auto& ex : examples) {
        if (ex.label >= C) {
            throw TrainingError("label " + std::to_string(ex.label) + " outside 0.." + std::to_string(M));
        }
        if (ex.x.dims != D) {
            throw DimensionError("feature dimension " + std::to_string(ex.x.dims) + " != model dimension " +
                                 std::to_string(D));
        }
        ++per_class[ex.label];
    }
    if (std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n > 0; }) < 2) {
        throw TrainingError("all training labels are the same class; nothing to learn");
    }
    if (hyper.batch == 0 || !(hyper.lr > 0.0) || hyper.l2 < 0.0) {
        throw TrainingError("invalid hyperparameters (batch >= 1, lr > 0, l2 >= 0 required)");
    }

    KModel model;
    model.D = D;
    model.M = M;
    model.theta.assign(D * C, 0.0);
    auto& meta = model.training_meta;
    meta.epochs = hyper.epochs;
    meta.lr = hyper.lr;
    meta.l2 = hyper.l2;
    meta.batch = hyper.batch;
    meta.seed = hyper.seed;
    meta.class_weighting = hyper.class_weighting;
    meta.num_examples = examples.size();
    meta.initial_loss = softmax_objective(model.theta, C, examples, hyper.l2, nullptr);

    std::mt19937_64 rng(hyper.seed);
    std::vector<std::size_t> order(examples.size());
    std::vector<TrainingExample> batch;
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            const std::size_t stop = std::min(order.size(), start + hyper.batch);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(examples[order[i]]);
            }
            softmax_objective(model.theta, C, batch, hyper.l2, &grad);
            for (std::size_t i = 0; i < model.theta.size(); ++i) {
                model.theta[i] -= hyper.lr * grad[i];
            }
        }
        const double loss = softmax_objective(model.theta, C, examples, hyper.l2, nullptr);
        if (!std::isfinite(loss)) {
            throw TrainingError("loss diverged (non-finite) at epoch " + std::to_string(epoch + 1) +
                                "; reduce the learning rate");
        }
        meta.loss_trace.push_back(loss);
    }
    meta.final_loss = meta.loss_trace.empty() ? meta.initial_loss : meta.loss_trace.back();
    if (meta.final_loss > meta.initial_loss) {
        throw TrainingError("final loss " + std::to_string(meta.final_loss) + " exceeds initial loss " +
                            std::to_string(meta.initial_loss) + "; reduce the learning rate");
    }
    return model;
}

KModel train(std::span<const KLabel> labels, const InstanceStore& train_store, const Featurizer& featurizer,
             std::size_t M, const KHyperParams& hyper) {
    std::vector<const KLabel*> sorted;
    for (const auto& l : labels) {
        if (hyper.drop_never_correct && !(l.confidence > 0.0)) {
            continue;
        }
        sorted.push_back(&l);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const KLabel* a, const KLabel* b) { return a->instance_id < b->instance_id; });

    std::vector<TrainingExample> examples;
    examples.reserve(sorted.size());
    std::vector<std::size_t> per_class(M + 1, 0);
    for (const auto* l : sorted) {
        const auto* x = train_store.find(l->instance_id);
        if (x == nullptr) {
            throw TrainingError("k-label for unknown training instance \"" + l->instance_id + "\"");
        }
        if (l->k_star > M) {
            throw TrainingError("k-label " + std::to_string(l->k_star) + " for \"" + l->instance_id +
                                "\" exceeds M = " + std::to_string(M));
        }
        examples.push_back({featurizer(x->text), l->k_star, 1.0});
        ++per_class[l->k_star];
    }
    if (hyper.class_weighting) {
        const auto present = static_cast<double>(
            std::count_if(per_class.begin(), per_class.end(), [](std::size_t n) { return n > 0; }));
        const auto n = static_cast<double>(examples.size());
        for (auto& ex : examples) {
            ex.weight = n / (present * static_cast<double>(per_class[ex.label]));
        }
    }
    return train_softmax(std::move(examples), featurizer.dims(), M, hyper);
}

std::size_t predict_k(const KModel& model, const FeatureVector& x) {
    if (x.dims != model.D) {
        throw DimensionError("feature dimension " + std::to_string(x.dims) + " != model dimension " +
                             std::to_string(model.D));
    }
    const auto z = logits(model, x);
    // max_element returns the first maximum, i.e. the smallest k on ties.
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::size_t predict_k(const KModel& model, const Featurizer& featurizer, const LabeledInstance& x) {
    if (featurizer.dims() != model.D) {
        throw DimensionError("featurizer dimension " + std::to_string(featurizer.dims()) +
                             " != model dimension " + std::to_string(model.D));
    }
    return predict_k(model, featurizer(x.text));
}

void save_model(const KModel& model, const std::filesystem::path& path) {
    const std::size_t C = model.num_classes();
    io::ordered_json j;
    j["format"] = "aicl-kmodel";
    j["version"] = kModelFormatVersion;
    j["D"] = model.D;
    j["M"] = model.M;
    io::ordered_json rows = io::ordered_json::object();
    for (std::size_t r = 0; r < model.D; ++r) {
        const auto first = model.theta.begin() + static_cast<std::ptrdiff_t>(r * C);
        if (std::all_of(first, first + static_cast<std::ptrdiff_t>(C), [](double v) { return v == 0.0; })) {
            continue;
        }
        rows[std::to_string(r)] = std::vector<double>(first, first + static_cast<std::ptrdiff_t>(C));
    }
    j["theta_rows"] = std::move(rows);
    const auto& m = model.training_meta;
    io::ordered_json meta;
    meta["epochs"] = m.epochs;
    meta["lr"] = m.lr;
    meta["l2"] = m.l2;
    meta["batch"] = m.batch;
    meta["seed"] = m.seed;
    meta["class_weighting"] = m.class_weighting;
    meta["num_examples"] = m.num_examples;
    meta["initial_loss"] = m.initial_loss;
    meta["final_loss"] = m.final_loss;
    meta["loss_trace"] = m.loss_trace;
    j["training_meta"] = std::move(meta);
    io::write_file_atomic(path, j.dump() + "\n");
}

KModel load_model(const std::filesystem::path& path) {
    const auto j = io::parse_json_file(path);
    if (j.value("format", "") != "aicl-kmodel" || j.value("version", 0) != kModelFormatVersion) {
        throw Error(path.string() + ": not an aicl-kmodel v" + std::to_string(kModelFormatVersion) + " file");
    }
    KModel model;
    try {
        model.D = j.at("D").get<std::size_t>();
        model.M = j.at("M").get<std::size_t>();
        const std::size_t C = model.num_classes();
        model.theta.assign(model.D * C, 0.0);
        for (const auto& [key, row] : j.at("theta_rows").items()) {
            const auto r = std::stoull(key);
            const auto values = row.get<std::vector<double>>();
            if (r >= model.D || values.size() != C) {
                throw DimensionError(path.string() + ": theta row " + key + " out of shape");
            }
            std::copy(values.begin(), values.end(), model.theta.begin() + static_cast<std::ptrdiff_t>(r * C));
        }
        const auto& meta = j.at("training_meta");
        auto& m = model.training_meta;
        m.epochs = meta.at("epochs").get<std::size_t>();
        m.lr = meta.at("lr").get<double>();
        m.l2 = meta.at("l2").get<double>();
        m.batch = meta.at("batch").get<std::size_t>();
        m.seed = meta.at("seed").get<std::uint64_t>();
        m.class_weighting = meta.at("class_weighting").get<bool>();
        m.num_examples = meta.at("num_examples").get<std::size_t>();
        m.initial_loss = meta.at("initial_loss").get<double>();
        m.final_loss = meta.at("final_loss").get<double>();
        m.loss_trace = meta.at("loss_trace").get<std::vector<double>>();
    } catch (const io::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    if (std::any_of(model.theta.begin(), model.theta.end(), [](double v) { return !std::isfinite(v); })) {
        throw Error(path.string() + ": non-finite parameter");
    }
    return model;
}

}  // namespace aicl
