#include "exqa/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "exqa/rng.hpp"

namespace exqa::pipeline {

using text::SourceKind;
using text::TokenSequence;

namespace {

const std::unordered_set<std::string> kStopwords = {
    "the", "a", "an", "of", "in", "on", "at", "to", "for", "by", "with", "and",
    "or",  "is", "are", "was", "were", "be", "been", ".", ",", "?", "!", "'", "\""};

const std::unordered_set<std::string> kYesNoLeads = {
    "does", "do", "did", "is", "are", "was", "were", "has", "have", "had",
    "can", "could", "will", "would", "should"};

const std::unordered_set<std::string> kNegations = {"not", "no", "never", "n't", "none"};

const std::unordered_set<std::string> kCopulas = {"is", "are", "was", "were"};

std::vector<std::vector<std::string>> split_sentences(const TokenSequence& seq) {
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> current;
    for (const auto& t : seq.tokens) {
        if (t == ".") {
            if (!current.empty()) sentences.push_back(current);
            current.clear();
        } else {
            current.push_back(t);
        }
    }
    if (!current.empty()) sentences.push_back(current);
    return sentences;
}

std::string join(const std::vector<std::string>& toks, std::size_t lo, std::size_t hi) {
    std::string out;
    for (std::size_t i = lo; i < hi; ++i) {
        if (!out.empty()) out += ' ';
        out += toks[i];
    }
    return out;
}

// Seed that depends only on the instance id, so selection is stable across
// evaluation orders.
std::uint64_t instance_seed(const std::string& id, std::uint64_t base) {
    std::uint64_t h = 1469598103934665603ull ^ base;
    for (unsigned char c : id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::string span_matcher_answer(const std::string& question, const std::string& explanation) {
    const auto q = text::tokenize(question, SourceKind::question);
    const auto e = text::tokenize(explanation, SourceKind::explanation);
    if (e.empty()) return "";

    // Yes/no questions: answer by polarity cues in the explanation.
    if (!q.empty() && kYesNoLeads.count(q.tokens.front()) > 0) {
        for (const auto& t : e.tokens) {
            if (kNegations.count(t) > 0) return "no";
        }
        return "yes";
    }

    const auto sentences = split_sentences(e);
    if (sentences.empty()) return "";

    // Question focus: non-stopword tokens; the token right after a leading
    // "which"/"what" marks the expected answer type.
    std::unordered_set<std::string> focus;
    for (const auto& t : q.tokens) {
        if (kStopwords.count(t) == 0) focus.insert(t);
    }
    std::string type_token;
    if (q.size() >= 2 && (q.tokens[0] == "which" || q.tokens[0] == "what")) {
        type_token = q.tokens[1];
    }

    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        std::unordered_set<std::string> seen;
        double score = 0.0;
        for (const auto& t : sentences[si]) {
            if (focus.count(t) > 0 && seen.insert(t).second) score += 1.0;
        }
        if (!type_token.empty() &&
            std::find(sentences[si].begin(), sentences[si].end(), type_token) !=
                sentences[si].end()) {
            score += 2.0;
        }
        if (score > best_score) {
            best_score = score;
            best = si;
        }
    }

    const auto& sent = sentences[best];
    // Span after the last copula, articles stripped.
    std::size_t span_lo = sent.size();
    for (std::size_t i = sent.size(); i-- > 0;) {
        if (kCopulas.count(sent[i]) > 0) {
            span_lo = i + 1;
            break;
        }
    }
    while (span_lo < sent.size() &&
           (sent[span_lo] == "a" || sent[span_lo] == "an" || sent[span_lo] == "the")) {
        ++span_lo;
    }
    if (span_lo < sent.size()) return join(sent, span_lo, sent.size());

    // No copula: longest run of tokens that are neither question tokens nor
    // stopwords; the earliest such run wins ties.
    std::unordered_set<std::string> qset(q.tokens.begin(), q.tokens.end());
    std::size_t run_lo = 0, run_len = 0, cur_lo = 0, cur_len = 0;
    for (std::size_t i = 0; i <= sent.size(); ++i) {
        const bool keep = i < sent.size() && qset.count(sent[i]) == 0 &&
                          kStopwords.count(sent[i]) == 0;
        if (keep) {
            if (cur_len == 0) cur_lo = i;
            ++cur_len;
        } else {
            if (cur_len > run_len) {
                run_len = cur_len;
                run_lo = cur_lo;
            }
            cur_len = 0;
        }
    }
    if (run_len == 0) return "";
    return join(sent, run_lo, run_lo + run_len);
}

std::vector<int> select_input_paragraphs(const corpus::QAInstance& instance,
                                         const ranker::RankerModel* ranker_model,
                                         const EvalOptions& options) {
    if (options.regime == InputRegime::ranked) {
        if (!ranker_model) throw std::invalid_argument("ranked regime requires a ranker model");
        const auto q = text::tokenize(instance.question, SourceKind::question);
        return ranker::rank_topk(*ranker_model, q, instance.paragraphs, options.k).indices;
    }

    std::vector<int> selected = instance.supporting_paragraph_indices();
    std::unordered_set<int> chosen(selected.begin(), selected.end());
    std::vector<int> rest;
    for (std::size_t i = 0; i < instance.paragraphs.size(); ++i) {
        if (chosen.count(static_cast<int>(i)) == 0) rest.push_back(static_cast<int>(i));
    }
    Rng rng(instance_seed(instance.id, options.seed));
    rng.shuffle(rest);
    for (int d = 0; d < options.distractors && d < static_cast<int>(rest.size()); ++d) {
        selected.push_back(rest[static_cast<std::size_t>(d)]);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

namespace {

// Reward evaluation with the oracle's answer already in hand, so each
// instance costs exactly one oracle round-trip.
reward::RewardBreakdown score_with_answer(const reward::RewardContext& ctx,
                                          const std::string& explanation,
                                          const std::string& predicted_answer,
                                          double seq_logprob, const reward::RLConfig& config,
                                          AcceptabilityScorer& acceptability) {
    const auto e = text::tokenize(explanation, SourceKind::explanation);
    const auto c = text::tokenize(ctx.paragraphs, SourceKind::paragraph);
    const auto q = text::tokenize(ctx.question, SourceKind::question);
    const auto gold = text::tokenize(ctx.gold_answer, SourceKind::answer);

    bool degenerate_abs = false;
    bool degenerate_span = false;
    std::array<double, reward::RewardBreakdown::kNumElements> r{};
    r[0] = reward::reward_compression(e, c);
    r[1] = reward::reward_abstractiveness(e, c, &degenerate_abs);
    r[2] = reward::reward_relevance(e, c);
    r[3] = reward::reward_question_coverage(e, q);
    r[4] = metrics::answer_f1(predicted_answer, ctx.gold_answer).f1;
    r[5] = reward::reward_span_exists(e, gold, &degenerate_span);
    r[6] = reward::reward_acceptability(explanation, acceptability);
    r[7] = reward::reward_noisiness(seq_logprob, config);
    r[8] = reward::reward_well_formed(e);
    auto breakdown = reward::combine(r);
    breakdown.degenerate_input = degenerate_abs || degenerate_span;
    return breakdown;
}

}  // namespace

PipelineResult run_instance(const corpus::QAInstance& instance,
                            const ranker::RankerModel* ranker_model,
                            const explainer::ExplainerModel& model, AnswerOracle& oracle,
                            AcceptabilityScorer& acceptability, const EvalOptions& options) {
    PipelineResult result;
    result.id = instance.id;
    result.row.id = instance.id;
    try {
        result.input_paragraphs = select_input_paragraphs(instance, ranker_model, options);
        const std::string c_text = instance.paragraphs_text(result.input_paragraphs);

        if (options.gold_passthrough) {
            if (!instance.gold_explanation) {
                throw std::invalid_argument("gold passthrough requested without gold explanation");
            }
            std::string joined;
            for (const auto& s : *instance.gold_explanation) {
                if (!joined.empty()) joined += ' ';
                joined += s;
            }
            result.explanation = joined;
            result.seq_logprob = 0.0;
        } else {
            const auto q = text::tokenize(instance.question, SourceKind::question);
            const auto c = text::tokenize(c_text, SourceKind::paragraph);
            const auto input = explainer::encode_input(model.vocab, model.cfg, q, c);
            const auto decoded =
                explainer::decode_greedy(model, input.ids, options.rl.max_explanation_tokens);
            result.explanation = decoded.text(model.vocab);
            result.seq_logprob = decoded.seq_logprob;
        }

        result.answer = oracle.answer(instance.question, result.explanation);

        reward::RewardContext ctx{instance.question, c_text, instance.gold_answer};
        result.rewards = score_with_answer(ctx, result.explanation, result.answer,
                                           result.seq_logprob, options.rl, acceptability);

        const auto f1em = metrics::answer_f1(result.answer, instance.gold_answer);
        result.row.f1 = f1em.f1;
        result.row.em = f1em.em;
        const auto e_toks = text::tokenize(result.explanation, SourceKind::explanation);
        const auto c_toks = text::tokenize(c_text, SourceKind::paragraph);
        if (!e_toks.empty()) {
            const auto conc = metrics::conciseness_metrics(e_toks, c_toks);
            result.row.cm = conc.cm;
            result.row.abs = conc.abs;
        }
        if (instance.gold_explanation) {
            std::string gold_joined;
            for (const auto& s : *instance.gold_explanation) {
                if (!gold_joined.empty()) gold_joined += ' ';
                gold_joined += s;
            }
            result.row.rg2 = metrics::rouge2(
                e_toks, text::tokenize(gold_joined, SourceKind::explanation));
        }
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

CorpusEvaluation evaluate_corpus(const std::vector<corpus::QAInstance>& instances,
                                 const ranker::RankerModel* ranker_model,
                                 const explainer::ExplainerModel& model, AnswerOracle& oracle,
                                 AcceptabilityScorer& acceptability, const EvalOptions& options,
                                 const std::map<std::string, int>* suf_labels) {
    CorpusEvaluation out;
    std::vector<metrics::InstanceMetrics> rows;
    for (const auto& inst : instances) {
        PipelineResult r =
            run_instance(inst, ranker_model, model, oracle, acceptability, options);
        if (!r.failed) {
            if (suf_labels) {
                auto it = suf_labels->find(r.id);
                if (it != suf_labels->end()) r.row.suf = it->second;
            }
            rows.push_back(r.row);
        }
        out.results.push_back(std::move(r));
    }
    out.report = metrics::build_report(std::move(rows));
    return out;
}

std::array<std::array<int, 2>, 2> sufficiency_correctness_matrix(
    const std::vector<PipelineResult>& results, const std::map<std::string, int>& suf_labels) {
    std::array<std::array<int, 2>, 2> counts{{{0, 0}, {0, 0}}};
    for (const auto& r : results) {
        auto it = suf_labels.find(r.id);
        if (it == suf_labels.end()) {
            throw std::invalid_argument("no sufficiency label for id " + r.id);
        }
        const int suf = it->second != 0 ? 1 : 0;
        const int correct = r.row.f1 > 0.5 ? 1 : 0;
        ++counts[static_cast<std::size_t>(suf)][static_cast<std::size_t>(correct)];
    }
    return counts;
}

std::vector<explainer::TrainItem> build_train_items(
    const std::vector<corpus::QAInstance>& instances, const explainer::Vocab& vocab,
    const explainer::ModelConfig& cfg, int distractors, std::uint64_t seed) {
    EvalOptions opts;
    opts.regime = InputRegime::gold_plus_distractor;
    opts.distractors = distractors;
    opts.seed = seed;

    std::vector<explainer::TrainItem> items;
    items.reserve(instances.size());
    for (const auto& inst : instances) {
        const auto selected = select_input_paragraphs(inst, nullptr, opts);
        const std::string c_text = inst.paragraphs_text(selected);
        const auto q = text::tokenize(inst.question, SourceKind::question);
        const auto c = text::tokenize(c_text, SourceKind::paragraph);

        explainer::TrainItem item;
        item.id = inst.id;
        item.input = explainer::encode_input(vocab, cfg, q, c).ids;
        item.reward_ctx = {inst.question, c_text, inst.gold_answer};
        if (inst.gold_explanation) {
            std::string joined;
            for (const auto& s : *inst.gold_explanation) {
                if (!joined.empty()) joined += ' ';
                joined += s;
            }
            const auto gold_toks = text::tokenize(joined, SourceKind::explanation);
            std::vector<int> gold_ids;
            for (const auto& t : gold_toks.tokens) gold_ids.push_back(vocab.id(t));
            gold_ids.push_back(explainer::Vocab::eos);
            item.gold = std::move(gold_ids);
        }
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace exqa::pipeline
