#include "exqa/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "exqa/rng.hpp"

namespace exqa::ranker {

using nlohmann::json;
using text::SourceKind;
using text::TokenSequence;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TokenSequence paragraph_tokens(const corpus::Paragraph& p) {
    std::string text = p.title;
    for (const auto& s : p.sentences) {
        text += ' ';
        text += s;
    }
    return text::tokenize(text, SourceKind::paragraph);
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "question_coverage", "paragraph_coverage", "question_bigram_coverage",
        "idf_overlap",       "log_paragraph_len",  "title_in_question"};
    return names;
}

std::vector<double> featurize(const RankerModel& model, const TokenSequence& question,
                              const TokenSequence& title, const TokenSequence& paragraph) {
    const auto wq = text::unigrams(question);
    const auto wp = text::unigrams(paragraph);

    std::vector<double> f(6, 0.0);
    f[0] = text::coverage(wp, wq);
    f[1] = text::coverage(wq, wp);
    f[2] = text::coverage(text::ngrams(paragraph, 2), text::ngrams(question, 2));

    double idf_hit = 0.0;
    double idf_total = 0.0;
    for (const auto& t : wq.grams) {
        auto it = model.idf.find(t);
        const double w = it == model.idf.end() ? model.idf_unseen : it->second;
        idf_total += w;
        if (wp.contains(t)) idf_hit += w;
    }
    f[3] = idf_total > 0.0 ? idf_hit / idf_total : 0.0;
    f[4] = std::log(1.0 + static_cast<double>(paragraph.size()));

    bool title_in_q = !title.empty();
    for (const auto& t : title.tokens) {
        if (!wq.contains(t)) {
            title_in_q = false;
            break;
        }
    }
    f[5] = title_in_q ? 1.0 : 0.0;
    return f;
}

double score_paragraph(const RankerModel& model, const TokenSequence& question,
                       const TokenSequence& title, const TokenSequence& paragraph) {
    const auto f = featurize(model, question, title, paragraph);
    double s = model.bias;
    for (std::size_t i = 0; i < f.size(); ++i) s += model.weights[i] * f[i];
    return s;
}

double bce_loss(const RankerModel& model, const std::vector<std::vector<double>>& rows,
                const std::vector<int>& labels) {
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double s = model.bias;
        for (std::size_t j = 0; j < rows[i].size(); ++j) s += model.weights[j] * rows[i][j];
        const double p = sigmoid(s);
        loss -= labels[i] == 1 ? std::log(p + eps) : std::log(1.0 - p + eps);
    }
    return loss / static_cast<double>(rows.size());
}

RankerModel train_ranker(const std::vector<corpus::QAInstance>& instances,
                         const RankerConfig& config, TrainStats* stats) {
    if (instances.empty()) throw std::invalid_argument("train_ranker: no instances");

    RankerModel model;
    model.feature_names = feature_names();
    model.weights.assign(model.feature_names.size(), 0.0);
    model.bias = 0.0;

    // Document frequencies over all paragraphs of the training set.
    std::size_t n_docs = 0;
    std::map<std::string, int> df;
    for (const auto& inst : instances) {
        for (const auto& p : inst.paragraphs) {
            ++n_docs;
            const auto toks = paragraph_tokens(p);
            std::unordered_set<std::string> seen(toks.tokens.begin(), toks.tokens.end());
            for (const auto& t : seen) ++df[t];
        }
    }
    for (const auto& [token, count] : df) {
        model.idf[token] = std::log((1.0 + static_cast<double>(n_docs)) /
                                    (1.0 + static_cast<double>(count)));
    }
    model.idf_unseen = std::log(1.0 + static_cast<double>(n_docs));

    // Training rows. Per question: supporting paragraphs positive, the rest
    // of the same instance negative, one supporting paragraph from a random
    // other question negative.
    Rng rng(config.rng_seed);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    int sampled_negatives = 0;
    for (std::size_t qi = 0; qi < instances.size(); ++qi) {
        const auto& inst = instances[qi];
        const auto question = text::tokenize(inst.question, SourceKind::question);
        const auto supporting = inst.supporting_paragraph_indices();
        const std::unordered_set<int> support_set(supporting.begin(), supporting.end());
        for (std::size_t pi = 0; pi < inst.paragraphs.size(); ++pi) {
            const auto& p = inst.paragraphs[pi];
            rows.push_back(featurize(model, question,
                                     text::tokenize(p.title, SourceKind::paragraph),
                                     paragraph_tokens(p)));
            labels.push_back(support_set.count(static_cast<int>(pi)) > 0 ? 1 : 0);
        }
        if (instances.size() > 1) {
            std::size_t oi = qi;
            while (oi == qi) {
                oi = static_cast<std::size_t>(rng.below(static_cast<int>(instances.size())));
            }
            const auto& other = instances[oi];
            const auto other_support = other.supporting_paragraph_indices();
            if (!other_support.empty()) {
                const int pick = other_support[static_cast<std::size_t>(
                    rng.below(static_cast<int>(other_support.size())))];
                const auto& p = other.paragraphs[static_cast<std::size_t>(pick)];
                rows.push_back(featurize(model, question,
                                         text::tokenize(p.title, SourceKind::paragraph),
                                         paragraph_tokens(p)));
                labels.push_back(0);
                ++sampled_negatives;
            }
        }
    }

    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!has_pos || !has_neg) {
        throw std::runtime_error("train_ranker: training data has a single class");
    }

    // Full-batch gradient descent on BCE.
    if (stats) stats->epoch_bce.clear();
    const double n = static_cast<double>(rows.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<double> gw(model.weights.size(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double s = model.bias;
            for (std::size_t j = 0; j < rows[i].size(); ++j) s += model.weights[j] * rows[i][j];
            const double err = sigmoid(s) - static_cast<double>(labels[i]);
            for (std::size_t j = 0; j < rows[i].size(); ++j) gw[j] += err * rows[i][j];
            gb += err;
        }
        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            model.weights[j] -= config.learning_rate * gw[j] / n;
        }
        model.bias -= config.learning_rate * gb / n;
        if (stats) stats->epoch_bce.push_back(bce_loss(model, rows, labels));
    }
    if (stats) stats->sampled_negatives = sampled_negatives;
    return model;
}

TopK rank_topk(const RankerModel& model, const TokenSequence& question,
               const std::vector<corpus::Paragraph>& paragraphs, int k) {
    if (k < 1) throw std::invalid_argument("rank_topk: k must be >= 1");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(paragraphs.size());
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        const auto& p = paragraphs[i];
        const double s = score_paragraph(model, question,
                                         text::tokenize(p.title, SourceKind::paragraph),
                                         paragraph_tokens(p));
        scored.emplace_back(s, static_cast<int>(i));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    TopK out;
    const std::size_t take = std::min(static_cast<std::size_t>(k), scored.size());
    out.short_input = scored.size() < static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < take; ++i) out.indices.push_back(scored[i].second);
    return out;
}

double recall_at_k(const RankerModel& model, const std::vector<corpus::QAInstance>& instances,
                   int k) {
    if (instances.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& inst : instances) {
        const auto question = text::tokenize(inst.question, SourceKind::question);
        const auto top = rank_topk(model, question, inst.paragraphs, k);
        const std::unordered_set<int> selected(top.indices.begin(), top.indices.end());
        const auto supporting = inst.supporting_paragraph_indices();
        bool all_in = !supporting.empty();
        for (int idx : supporting) {
            if (selected.count(idx) == 0) {
                all_in = false;
                break;
            }
        }
        if (all_in) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(instances.size());
}

void RankerModel::save(const std::string& path) const {
    json j;
    j["feature_names"] = feature_names;
    j["weights"] = weights;
    j["bias"] = bias;
    j["idf"] = idf;
    j["idf_unseen"] = idf_unseen;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ranker model: " + path);
    out << j.dump(1) << '\n';
}

RankerModel RankerModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read ranker model: " + path);
    json j;
    in >> j;
    RankerModel m;
    m.feature_names = j["feature_names"].get<std::vector<std::string>>();
    m.weights = j["weights"].get<std::vector<double>>();
    m.bias = j["bias"].get<double>();
    m.idf = j["idf"].get<std::map<std::string, double>>();
    m.idf_unseen = j["idf_unseen"].get<double>();
    if (m.weights.size() != m.feature_names.size()) {
        throw std::runtime_error("ranker model weight/feature mismatch in " + path);
    }
    return m;
}

}  // namespace exqa::ranker
