#include "exqa/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "exqa/rewards.hpp"

namespace exqa::metrics {

namespace {

std::unordered_map<std::string, int> count_tokens(const std::vector<std::string>& toks) {
    std::unordered_map<std::string, int> counts;
    for (const auto& t : toks) ++counts[t];
    return counts;
}

std::unordered_map<std::string, int> count_bigrams(const text::TokenSequence& seq) {
    std::unordered_map<std::string, int> counts;
    const auto& t = seq.tokens;
    for (std::size_t i = 0; i + 2 <= t.size(); ++i) {
        ++counts[t[i] + ' ' + t[i + 1]];
    }
    return counts;
}

int multiset_overlap(const std::unordered_map<std::string, int>& a,
                     const std::unordered_map<std::string, int>& b) {
    int overlap = 0;
    for (const auto& [key, count] : a) {
        auto it = b.find(key);
        if (it != b.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

}  // namespace

F1EM answer_f1(const std::string& prediction, const std::string& gold) {
    const auto pred = text::normalize_answer(prediction);
    const auto ref = text::normalize_answer(gold);

    F1EM out;
    out.em = pred.tokens == ref.tokens ? 1 : 0;
    if (pred.empty() && ref.empty()) {
        out.f1 = 1.0;
        return out;
    }
    if (pred.empty() || ref.empty()) {
        out.f1 = 0.0;
        return out;
    }
    const int overlap = multiset_overlap(count_tokens(pred.tokens), count_tokens(ref.tokens));
    if (overlap == 0) {
        out.f1 = 0.0;
        return out;
    }
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    out.f1 = 2.0 * precision * recall / (precision + recall);
    return out;
}

double rouge2(const text::TokenSequence& candidate, const text::TokenSequence& reference) {
    const auto cand = count_bigrams(candidate);
    const auto ref = count_bigrams(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    int cand_total = 0;
    for (const auto& [_, c] : cand) cand_total += c;
    int ref_total = 0;
    for (const auto& [_, c] : ref) ref_total += c;

    const int overlap = multiset_overlap(cand, ref);
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / cand_total;
    const double recall = static_cast<double>(overlap) / ref_total;
    return 2.0 * precision * recall / (precision + recall);
}

Conciseness conciseness_metrics(const text::TokenSequence& explanation,
                                const text::TokenSequence& paragraphs) {
    if (explanation.empty()) {
        throw std::invalid_argument("conciseness_metrics: empty explanation");
    }
    Conciseness out;
    out.cm = static_cast<double>(paragraphs.size()) / static_cast<double>(explanation.size());
    out.abs = reward::reward_abstractiveness(explanation, paragraphs);
    return out;
}

SufLabel suf_label_from_string(const std::string& s) {
    if (s == "yes") return SufLabel::yes;
    if (s == "likely") return SufLabel::likely;
    if (s == "no") return SufLabel::no;
    if (s == "unsure") return SufLabel::unsure;
    throw std::invalid_argument("unknown sufficiency label: " + s);
}

std::string to_string(SufLabel label) {
    switch (label) {
        case SufLabel::yes: return "yes";
        case SufLabel::likely: return "likely";
        case SufLabel::no: return "no";
        case SufLabel::unsure: return "unsure";
    }
    return "no";
}

int aggregate_sufficiency(const std::vector<SufficiencyJudgement>& judgements) {
    if (judgements.empty()) {
        throw std::invalid_argument("aggregate_sufficiency: no judgements");
    }
    int yes = 0;
    int no = 0;
    for (const auto& j : judgements) {
        SufLabel label = j.label;
        // A worker whose inferred answer misses the gold answer is treated
        // as having judged the explanation insufficient, as is "unsure".
        if (answer_f1(j.worker_answer, j.gold_answer).em == 0) {
            label = SufLabel::no;
        } else if (label == SufLabel::unsure) {
            label = SufLabel::no;
        } else if (label == SufLabel::likely) {
            label = SufLabel::yes;
        }
        if (label == SufLabel::yes) {
            ++yes;
        } else {
            ++no;
        }
    }
    return yes > no ? 1 : 0;
}

double xf1(const std::vector<SufF1>& rows) {
    if (rows.empty()) throw std::invalid_argument("xf1: empty list");
    double sum = 0.0;
    for (const auto& r : rows) sum += static_cast<double>(r.suf) * r.f1;
    return sum / static_cast<double>(rows.size());
}

MetricsReport build_report(std::vector<InstanceMetrics> rows) {
    MetricsReport report;
    report.per_instance = std::move(rows);
    auto& corpus = report.corpus;
    corpus.n_instances = report.per_instance.size();
    if (report.per_instance.empty()) return report;

    double f1_sum = 0.0;
    double em_sum = 0.0;
    double cm_sum = 0.0;
    double abs_sum = 0.0;
    double rg2_sum = 0.0;
    std::size_t cm_n = 0, abs_n = 0, rg2_n = 0;
    std::vector<SufF1> suf_rows;
    for (const auto& row : report.per_instance) {
        f1_sum += row.f1;
        em_sum += row.em;
        if (row.cm) {
            cm_sum += *row.cm;
            ++cm_n;
        }
        if (row.abs) {
            abs_sum += *row.abs;
            ++abs_n;
        }
        if (row.rg2) {
            rg2_sum += *row.rg2;
            ++rg2_n;
        }
        if (row.suf) suf_rows.push_back({*row.suf, row.f1});
    }
    const double n = static_cast<double>(report.per_instance.size());
    corpus.mean_f1 = f1_sum / n;
    corpus.mean_em = em_sum / n;
    if (cm_n > 0) corpus.mean_cm = cm_sum / static_cast<double>(cm_n);
    if (abs_n > 0) corpus.mean_abs = abs_sum / static_cast<double>(abs_n);
    if (rg2_n > 0) corpus.mean_rg2 = rg2_sum / static_cast<double>(rg2_n);
    if (!suf_rows.empty()) {
        corpus.xf1 = xf1(suf_rows);
        double suf_sum = 0.0;
        for (const auto& r : suf_rows) suf_sum += r.suf;
        corpus.suf_rate = suf_sum / static_cast<double>(suf_rows.size());
    }
    return report;
}

}  // namespace exqa::metrics
