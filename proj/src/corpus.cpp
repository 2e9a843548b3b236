#include "exqa/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "exqa/rewards.hpp"
#include "exqa/rng.hpp"
#include "exqa/textkit.hpp"

namespace exqa::corpus {

using nlohmann::json;

namespace {

// Closed-class grammar of the synthetic task. Subjects and values come from
// the (configurable) vocabulary; these lists shape the sentences.
const std::vector<std::string> kRelations = {
    "pet", "car", "robot", "boat", "garden", "shop", "tower", "bakery"};
const std::vector<std::string> kKinds = {
    "color", "size", "shape", "sound", "smell", "taste", "age", "style"};
const std::vector<std::string> kOccupations = {
    "farmer", "singer", "doctor", "pilot", "baker", "teacher", "sailor", "judge"};

std::string collapse_ws(const std::string& s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            pending = !out.empty();
        } else {
            if (pending) out += ' ';
            pending = false;
            out += c;
        }
    }
    return out;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

QAInstance parse_hotpot_record(const json& rec, std::size_t index) {
    std::string id = rec.contains("_id") && rec["_id"].is_string()
                         ? rec["_id"].get<std::string>()
                         : "record#" + std::to_string(index);
    auto fail = [&](const std::string& what) -> ParseError {
        return ParseError("record " + id + ": " + what);
    };

    if (!rec.is_object()) throw fail("not an object");
    if (!rec.contains("question") || !rec["question"].is_string()) throw fail("missing question");
    if (!rec.contains("answer") || !rec["answer"].is_string()) throw fail("missing answer");
    if (!rec.contains("context") || !rec["context"].is_array()) throw fail("missing context");
    if (!rec.contains("supporting_facts") || !rec["supporting_facts"].is_array()) {
        throw fail("missing supporting_facts");
    }

    QAInstance inst;
    inst.id = id;
    inst.question = rec["question"].get<std::string>();
    inst.gold_answer = rec["answer"].get<std::string>();
    if (inst.gold_answer.empty()) throw fail("empty answer");

    for (const auto& p : rec["context"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_array()) {
            throw fail("malformed context paragraph");
        }
        Paragraph para;
        para.title = p[0].get<std::string>();
        for (const auto& s : p[1]) {
            if (!s.is_string()) throw fail("malformed sentence in " + para.title);
            para.sentences.push_back(s.get<std::string>());
        }
        inst.paragraphs.push_back(std::move(para));
    }

    for (const auto& sf : rec["supporting_facts"]) {
        if (!sf.is_array() || sf.size() != 2 || !sf[0].is_string() ||
            !sf[1].is_number_integer()) {
            throw fail("malformed supporting fact");
        }
        SupportingFact fact{sf[0].get<std::string>(), sf[1].get<int>()};
        auto para = std::find_if(inst.paragraphs.begin(), inst.paragraphs.end(),
                                 [&](const Paragraph& p) { return p.title == fact.title; });
        if (para == inst.paragraphs.end()) {
            throw fail("supporting fact title not in context: " + fact.title);
        }
        if (fact.sentence_index < 0 ||
            fact.sentence_index >= static_cast<int>(para->sentences.size())) {
            throw fail("supporting fact index out of range in " + fact.title);
        }
        inst.supporting_facts.push_back(std::move(fact));
    }

    if (rec.contains("gold_explanation")) {
        if (!rec["gold_explanation"].is_array()) throw fail("malformed gold_explanation");
        std::vector<std::string> expl;
        for (const auto& s : rec["gold_explanation"]) {
            if (!s.is_string()) throw fail("malformed gold_explanation sentence");
            expl.push_back(s.get<std::string>());
        }
        inst.gold_explanation = std::move(expl);
    }
    return inst;
}

}  // namespace

std::string QAInstance::paragraphs_text(const std::vector<int>& indices) const {
    std::vector<int> selected = indices;
    if (selected.empty()) {
        selected.resize(paragraphs.size());
        for (std::size_t i = 0; i < paragraphs.size(); ++i) selected[i] = static_cast<int>(i);
    }
    std::string out;
    for (int idx : selected) {
        if (idx < 0 || idx >= static_cast<int>(paragraphs.size())) continue;
        const auto& p = paragraphs[static_cast<std::size_t>(idx)];
        if (!out.empty()) out += ' ';
        out += p.title;
        out += " .";
        for (const auto& s : p.sentences) {
            out += ' ';
            out += s;
        }
    }
    return out;
}

std::vector<int> QAInstance::supporting_paragraph_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        const auto& title = paragraphs[i].title;
        bool supporting = std::any_of(supporting_facts.begin(), supporting_facts.end(),
                                      [&](const SupportingFact& sf) { return sf.title == title; });
        if (supporting) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<QAInstance> load_hotpotqa(const std::string& path) {
    json j = load_json_file(path);
    const json* records = nullptr;
    if (j.is_array()) {
        records = &j;
    } else if (j.is_object() && j.contains("data") && j["data"].is_array()) {
        records = &j["data"];
    } else {
        throw ParseError(path + ": expected an array of records");
    }
    std::vector<QAInstance> out;
    out.reserve(records->size());
    for (std::size_t i = 0; i < records->size(); ++i) {
        out.push_back(parse_hotpot_record((*records)[i], i));
    }
    return out;
}

std::map<std::string, std::vector<std::vector<Triplet>>> load_r4c(const std::string& path) {
    json j = load_json_file(path);
    if (j.is_object() && j.contains("data") && j["data"].is_object()) j = j["data"];
    if (!j.is_object()) throw ParseError(path + ": expected a map id -> derivations");

    std::map<std::string, std::vector<std::vector<Triplet>>> out;
    for (const auto& [id, derivations] : j.items()) {
        if (!derivations.is_array()) throw ParseError("id " + id + ": derivations not an array");
        std::vector<std::vector<Triplet>> per_annotator;
        for (const auto& derivation : derivations) {
            if (!derivation.is_array()) throw ParseError("id " + id + ": derivation not an array");
            std::vector<Triplet> triplets;
            for (const auto& t : derivation) {
                if (!t.is_array() || t.size() != 3 || !t[0].is_string() ||
                    !t[1].is_string() || !t[2].is_string()) {
                    throw ParseError("id " + id + ": malformed triplet");
                }
                Triplet trip{t[0].get<std::string>(), t[1].get<std::string>(),
                             t[2].get<std::string>()};
                if (trip.head.empty() || trip.relation.empty() || trip.tail.empty()) {
                    throw ParseError("id " + id + ": empty triplet field");
                }
                triplets.push_back(std::move(trip));
            }
            per_annotator.push_back(std::move(triplets));
        }
        out[id] = std::move(per_annotator);
    }
    return out;
}

std::vector<std::string> flatten_triplets(const std::vector<Triplet>& derivation) {
    if (derivation.empty()) {
        throw std::invalid_argument("flatten_triplets: empty derivation");
    }
    std::vector<std::string> out;
    out.reserve(derivation.size());
    for (const auto& t : derivation) {
        std::string sentence = collapse_ws(t.head) + ' ' + collapse_ws(t.relation) + ' ' +
                               collapse_ws(t.tail) + " .";
        out.push_back(std::move(sentence));
    }
    return out;
}

const std::vector<std::string>& default_vocab() {
    static const std::vector<std::string> vocab = {
        // subjects: people
        "alda", "bruno", "carla", "dario", "elena", "felix", "greta", "hugo", "irene",
        "jonas", "karin", "lars", "mira", "nils", "olga", "pavel", "quinn", "rosa",
        // subjects: named things reached in the first hop
        "rex", "milo", "tara", "zuma", "bolt", "nova", "remo", "saga", "tiko",
        "vera", "ugo", "wren", "yara", "fenn", "kali", "oban", "pico", "duna",
        // attribute values
        "blue", "green", "crimson", "amber", "silver", "violet", "round", "square",
        "oval", "slim", "giant", "tiny", "loud", "soft", "deep", "sweet", "sour", "mild"};
    return vocab;
}

namespace {

struct Pools {
    std::vector<std::string> persons;
    std::vector<std::string> bridges;
    std::vector<std::string> values;
};

Pools split_vocab(const std::vector<std::string>& vocab) {
    Pools pools;
    const std::size_t third = vocab.size() / 3;
    pools.persons.assign(vocab.begin(), vocab.begin() + third);
    pools.bridges.assign(vocab.begin() + third, vocab.begin() + 2 * third);
    pools.values.assign(vocab.begin() + 2 * third, vocab.end());
    return pools;
}

std::string person_pronoun(std::size_t person_index) {
    return person_index % 2 == 0 ? "his" : "her";
}

}  // namespace

std::vector<QAInstance> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_instances < 0) throw std::invalid_argument("n_instances must be >= 0");
    if (spec.pronoun_rate < 0.0 || spec.pronoun_rate > 1.0) {
        throw std::invalid_argument("pronoun_rate must be in [0,1]");
    }
    const auto& vocab = spec.vocab.empty() ? default_vocab() : spec.vocab;
    const Pools pools = split_vocab(vocab);
    if (pools.persons.empty() || pools.bridges.empty() || pools.values.empty()) {
        throw std::invalid_argument("vocabulary too small: need at least 3 words");
    }

    const long long capacity = static_cast<long long>(pools.persons.size()) *
                               static_cast<long long>(kRelations.size()) *
                               static_cast<long long>(kKinds.size());
    if (capacity < spec.n_instances) {
        throw std::invalid_argument("vocabulary too small for requested n_instances");
    }
    if (static_cast<int>(pools.persons.size() + pools.bridges.size()) <
        spec.n_distractor_paragraphs + 2) {
        throw std::invalid_argument("vocabulary too small for distractor paragraphs");
    }

    Rng rng(spec.rng_seed);

    // Unique (person, relation, kind) triple per instance.
    std::vector<long long> triple_ids(static_cast<std::size_t>(capacity));
    for (std::size_t i = 0; i < triple_ids.size(); ++i) triple_ids[i] = static_cast<long long>(i);
    rng.shuffle(triple_ids);

    std::vector<QAInstance> out;
    out.reserve(static_cast<std::size_t>(spec.n_instances));
    for (int inst_i = 0; inst_i < spec.n_instances; ++inst_i) {
        const long long triple = triple_ids[static_cast<std::size_t>(inst_i)];
        const std::size_t person_i =
            static_cast<std::size_t>(triple / (kRelations.size() * kKinds.size()));
        const std::size_t rel_i =
            static_cast<std::size_t>((triple / kKinds.size()) % kRelations.size());
        const std::size_t kind_i = static_cast<std::size_t>(triple % kKinds.size());

        const std::string& person = pools.persons[person_i];
        const std::string& relation = kRelations[rel_i];
        const std::string& kind = kKinds[kind_i];
        const std::string& bridge = pools.bridges[static_cast<std::size_t>(
            rng.below(static_cast<int>(pools.bridges.size())))];
        const std::string& value = pools.values[static_cast<std::size_t>(
            rng.below(static_cast<int>(pools.values.size())))];

        const std::string hop1_full = "the " + relation + " of " + person + " is " + bridge + " .";
        const std::string hop2_full = "the " + kind + " of " + bridge + " is " + value + " .";
        const bool hop1_pronoun = rng.uniform() < spec.pronoun_rate;
        const bool hop2_pronoun = rng.uniform() < spec.pronoun_rate;

        QAInstance inst;
        {
            std::ostringstream id;
            id << "syn-" << spec.rng_seed << "-" << inst_i;
            inst.id = id.str();
        }
        inst.question = "which " + kind + " does the " + relation + " of " + person + " have ?";
        inst.gold_answer = value;

        // Supporting paragraph about the person: intro, first-hop fact,
        // extra facts about the same person.
        Paragraph p1;
        p1.title = person;
        p1.sentences.push_back(person + " is a " +
                               kOccupations[static_cast<std::size_t>(
                                   rng.below(static_cast<int>(kOccupations.size())))] +
                               " .");
        p1.sentences.push_back(hop1_pronoun
                                   ? person_pronoun(person_i) + " " + relation + " is " + bridge + " ."
                                   : hop1_full);
        const int hop1_index = 1;
        for (int f = 0; f < spec.n_distractor_sentences; ++f) {
            const std::string& rel2 =
                kRelations[static_cast<std::size_t>((rel_i + 1 + f) % kRelations.size())];
            const std::string& obj = pools.bridges[static_cast<std::size_t>(
                rng.below(static_cast<int>(pools.bridges.size())))];
            p1.sentences.push_back("the " + rel2 + " of " + person + " is " + obj + " .");
        }

        // Supporting paragraph about the bridge entity: intro, second-hop
        // fact, extra attributes.
        Paragraph p2;
        p2.title = bridge;
        p2.sentences.push_back(bridge + " is a famous " + relation + " .");
        p2.sentences.push_back(hop2_pronoun ? "its " + kind + " is " + value + " ." : hop2_full);
        const int hop2_index = 1;
        for (int f = 0; f < spec.n_distractor_sentences; ++f) {
            const std::string& kind2 =
                kKinds[static_cast<std::size_t>((kind_i + 1 + f) % kKinds.size())];
            const std::string& val2 = pools.values[static_cast<std::size_t>(
                rng.below(static_cast<int>(pools.values.size())))];
            if (rng.uniform() < spec.pronoun_rate) {
                p2.sentences.push_back("its " + kind2 + " is " + val2 + " .");
            } else {
                p2.sentences.push_back("the " + kind2 + " of " + bridge + " is " + val2 + " .");
            }
        }

        // Distractor paragraphs about other subjects.
        std::vector<std::string> other_subjects;
        std::vector<bool> other_is_person;
        for (std::size_t i = 0; i < pools.persons.size(); ++i) {
            if (pools.persons[i] != person) {
                other_subjects.push_back(pools.persons[i]);
                other_is_person.push_back(true);
            }
        }
        for (std::size_t i = 0; i < pools.bridges.size(); ++i) {
            if (pools.bridges[i] != bridge) {
                other_subjects.push_back(pools.bridges[i]);
                other_is_person.push_back(false);
            }
        }
        std::vector<std::size_t> order(other_subjects.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        std::vector<Paragraph> paragraphs{p1, p2};
        for (int d = 0; d < spec.n_distractor_paragraphs; ++d) {
            const std::size_t pick = order[static_cast<std::size_t>(d)];
            const std::string& subject = other_subjects[pick];
            Paragraph dp;
            dp.title = subject;
            if (other_is_person[pick]) {
                dp.sentences.push_back(subject + " is a " +
                                       kOccupations[static_cast<std::size_t>(rng.below(
                                           static_cast<int>(kOccupations.size())))] +
                                       " .");
                for (int f = 0; f <= spec.n_distractor_sentences; ++f) {
                    const std::string& rel2 = kRelations[static_cast<std::size_t>(
                        rng.below(static_cast<int>(kRelations.size())))];
                    const std::string& obj = pools.bridges[static_cast<std::size_t>(
                        rng.below(static_cast<int>(pools.bridges.size())))];
                    dp.sentences.push_back("the " + rel2 + " of " + subject + " is " + obj + " .");
                }
            } else {
                const std::string& rel2 = kRelations[static_cast<std::size_t>(
                    rng.below(static_cast<int>(kRelations.size())))];
                dp.sentences.push_back(subject + " is a famous " + rel2 + " .");
                for (int f = 0; f <= spec.n_distractor_sentences; ++f) {
                    const std::string& kind2 = kKinds[static_cast<std::size_t>(
                        rng.below(static_cast<int>(kKinds.size())))];
                    const std::string& val2 = pools.values[static_cast<std::size_t>(
                        rng.below(static_cast<int>(pools.values.size())))];
                    if (rng.uniform() < spec.pronoun_rate) {
                        dp.sentences.push_back("its " + kind2 + " is " + val2 + " .");
                    } else {
                        dp.sentences.push_back("the " + kind2 + " of " + subject + " is " + val2 +
                                               " .");
                    }
                }
            }
            paragraphs.push_back(std::move(dp));
        }

        std::vector<std::size_t> positions(paragraphs.size());
        for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
        rng.shuffle(positions);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            inst.paragraphs.push_back(paragraphs[positions[i]]);
        }

        inst.supporting_facts.push_back({person, hop1_index});
        inst.supporting_facts.push_back({bridge, hop2_index});

        if (spec.summarization_targets) {
            // Generic compression targets: every fact of the two supporting
            // paragraphs, pronouns resolved, intros dropped.
            inst.question = "summarize";
            std::vector<std::string> target;
            target.push_back(hop1_full);
            for (std::size_t s = 2; s < p1.sentences.size(); ++s) target.push_back(p1.sentences[s]);
            target.push_back(hop2_full);
            for (std::size_t s = 2; s < p2.sentences.size(); ++s) {
                std::string sent = p2.sentences[s];
                if (sent.rfind("its ", 0) == 0) {
                    // "its K is V ." -> "the K of <bridge> is V ."
                    auto toks = text::tokenize(sent, text::SourceKind::paragraph);
                    if (toks.size() == 5) {
                        sent = "the " + toks.tokens[1] + " of " + bridge + " is " +
                               toks.tokens[3] + " .";
                    }
                }
                target.push_back(sent);
            }
            inst.gold_explanation = std::move(target);
        } else {
            inst.gold_explanation = std::vector<std::string>{hop1_full, hop2_full};
        }
        out.push_back(std::move(inst));
    }
    return out;
}

namespace {

struct Fact {
    std::string relation;
    std::string subject;
    std::string value;
};

// Accepts "the REL of SUBJ is VALUE..." and "REL of SUBJ is VALUE...".
// Pronoun-led sentences ("its color is blue") have no resolvable subject and
// are deliberately not facts.
std::vector<Fact> parse_facts(const std::string& explanation) {
    const auto toks = text::tokenize(explanation, text::SourceKind::explanation);
    std::vector<Fact> facts;
    std::vector<std::string> sentence;
    auto flush = [&]() {
        if (sentence.size() >= 5) {
            std::size_t i = sentence[0] == "the" ? 1 : 0;
            if (i + 4 <= sentence.size() && sentence[i + 1] == "of" && sentence[i + 3] == "is") {
                std::string value;
                for (std::size_t k = i + 4; k < sentence.size(); ++k) {
                    if (!value.empty()) value += ' ';
                    value += sentence[k];
                }
                if (!value.empty()) {
                    facts.push_back({sentence[i], sentence[i + 2], value});
                }
            }
        }
        sentence.clear();
    };
    for (const auto& t : toks.tokens) {
        if (t == ".") {
            flush();
        } else {
            sentence.push_back(t);
        }
    }
    flush();
    return facts;
}

}  // namespace

std::string synthetic_answer_oracle(const std::string& question,
                                    const std::string& explanation) {
    const auto q = text::tokenize(question, text::SourceKind::question);
    // "which K does the R of Z have ?"
    if (q.size() != 9 || q.tokens[0] != "which" || q.tokens[2] != "does" ||
        q.tokens[3] != "the" || q.tokens[5] != "of" || q.tokens[7] != "have" ||
        q.tokens[8] != "?") {
        return "";
    }
    const std::string& kind = q.tokens[1];
    const std::string& relation = q.tokens[4];
    const std::string& person = q.tokens[6];

    const auto facts = parse_facts(explanation);
    std::string bridge;
    for (const auto& f : facts) {
        if (f.relation == relation && f.subject == person) {
            bridge = f.value;
            break;
        }
    }
    if (bridge.empty()) return "";
    for (const auto& f : facts) {
        if (f.relation == kind && f.subject == bridge) return f.value;
    }
    // Linked entity found but its attribute is missing: best remaining guess.
    return bridge;
}

double answer_span_sanity(const std::vector<QAInstance>& instances) {
    if (instances.empty()) return 1.0;
    std::size_t ok = 0;
    for (const auto& inst : instances) {
        const auto gold = text::normalize_answer(inst.gold_answer);
        if (gold.tokens == std::vector<std::string>{"yes"} ||
            gold.tokens == std::vector<std::string>{"no"}) {
            ++ok;
            continue;
        }
        std::string sf_text;
        for (const auto& sf : inst.supporting_facts) {
            for (const auto& p : inst.paragraphs) {
                if (p.title == sf.title &&
                    sf.sentence_index < static_cast<int>(p.sentences.size())) {
                    sf_text += p.sentences[static_cast<std::size_t>(sf.sentence_index)];
                    sf_text += ' ';
                }
            }
        }
        const auto sf_tokens = text::tokenize(sf_text, text::SourceKind::paragraph);
        const auto gold_tokens = text::tokenize(inst.gold_answer, text::SourceKind::answer);
        if (reward::reward_span_exists(sf_tokens, gold_tokens) == 1.0) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(instances.size());
}

}  // namespace exqa::corpus
