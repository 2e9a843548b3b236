#include "exqa/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace exqa::explainer {

using nlohmann::json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// probs = softmax(logits / temperature), returned in place of scratch.
void softmax_scaled(const std::vector<double>& logits, double temperature,
                    std::vector<double>& probs) {
    probs.resize(logits.size());
    double max_scaled = -std::numeric_limits<double>::infinity();
    for (double v : logits) max_scaled = std::max(max_scaled, v / temperature);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] / temperature - max_scaled);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
}

struct GruView {
    const double* w;  // 3H x D
    const double* u;  // 3H x H
    const double* b;  // 3H
};

struct GruStepCache {
    std::vector<double> z, r, n, uh;  // H each; uh = (U_n h_prev)
};

// h_out = GRU(x, h_prev); gate rows are laid out [z; r; n].
void gru_forward(const GruView& g, const double* x, const double* h_prev, int d, int h,
                 GruStepCache* cache, double* h_out) {
    std::vector<double> z(h), r(h), n(h), uh(h);
    for (int k = 0; k < h; ++k) {
        double az = g.b[k];
        double ar = g.b[h + k];
        double an_x = g.b[2 * h + k];
        const double* wz = g.w + static_cast<std::size_t>(k) * d;
        const double* wr = g.w + static_cast<std::size_t>(h + k) * d;
        const double* wn = g.w + static_cast<std::size_t>(2 * h + k) * d;
        for (int j = 0; j < d; ++j) {
            az += wz[j] * x[j];
            ar += wr[j] * x[j];
            an_x += wn[j] * x[j];
        }
        const double* uz = g.u + static_cast<std::size_t>(k) * h;
        const double* ur = g.u + static_cast<std::size_t>(h + k) * h;
        const double* un = g.u + static_cast<std::size_t>(2 * h + k) * h;
        double uhk = 0.0;
        for (int j = 0; j < h; ++j) {
            az += uz[j] * h_prev[j];
            ar += ur[j] * h_prev[j];
            uhk += un[j] * h_prev[j];
        }
        z[k] = sigmoid(az);
        r[k] = sigmoid(ar);
        uh[k] = uhk;
        n[k] = std::tanh(an_x + r[k] * uhk);
    }
    for (int k = 0; k < h; ++k) h_out[k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
    if (cache) {
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->n = std::move(n);
        cache->uh = std::move(uh);
    }
}

struct GruGradView {
    double* w;
    double* u;
    double* b;
};

// Backward through one GRU step. dh is dL/dh_out; accumulates into dh_prev,
// dx and the parameter gradients.
void gru_backward(const GruView& g, const GruGradView& grad, const GruStepCache& c,
                  const double* x, const double* h_prev, const double* dh, int d, int h,
                  double* dh_prev, double* dx) {
    for (int k = 0; k < h; ++k) {
        const double zk = c.z[k];
        const double rk = c.r[k];
        const double nk = c.n[k];
        const double dz = dh[k] * (h_prev[k] - nk);
        const double dn = dh[k] * (1.0 - zk);
        dh_prev[k] += dh[k] * zk;

        const double dan = dn * (1.0 - nk * nk);
        const double dr = dan * c.uh[k];
        const double duh = dan * rk;
        const double dar = dr * rk * (1.0 - rk);
        const double daz = dz * zk * (1.0 - zk);

        grad.b[k] += daz;
        grad.b[h + k] += dar;
        grad.b[2 * h + k] += dan;

        double* gwz = grad.w + static_cast<std::size_t>(k) * d;
        double* gwr = grad.w + static_cast<std::size_t>(h + k) * d;
        double* gwn = grad.w + static_cast<std::size_t>(2 * h + k) * d;
        const double* wz = g.w + static_cast<std::size_t>(k) * d;
        const double* wr = g.w + static_cast<std::size_t>(h + k) * d;
        const double* wn = g.w + static_cast<std::size_t>(2 * h + k) * d;
        for (int j = 0; j < d; ++j) {
            gwz[j] += daz * x[j];
            gwr[j] += dar * x[j];
            gwn[j] += dan * x[j];
            dx[j] += wz[j] * daz + wr[j] * dar + wn[j] * dan;
        }
        double* guz = grad.u + static_cast<std::size_t>(k) * h;
        double* gur = grad.u + static_cast<std::size_t>(h + k) * h;
        double* gun = grad.u + static_cast<std::size_t>(2 * h + k) * h;
        const double* uz = g.u + static_cast<std::size_t>(k) * h;
        const double* ur = g.u + static_cast<std::size_t>(h + k) * h;
        const double* un = g.u + static_cast<std::size_t>(2 * h + k) * h;
        for (int j = 0; j < h; ++j) {
            guz[j] += daz * h_prev[j];
            gur[j] += dar * h_prev[j];
            gun[j] += duh * h_prev[j];
            dh_prev[j] += uz[j] * daz + ur[j] * dar + un[j] * duh;
        }
    }
}

struct ModelViews {
    const double* embedding;
    GruView enc;
    GruView dec;
    const double* out_w;  // V x 2H
    const double* out_b;  // V
};

ModelViews make_views(const ExplainerModel& m) {
    ModelViews v{};
    v.embedding = m.view("embedding").data();
    v.enc = {m.view("enc_w").data(), m.view("enc_u").data(), m.view("enc_b").data()};
    v.dec = {m.view("dec_w").data(), m.view("dec_u").data(), m.view("dec_b").data()};
    v.out_w = m.view("out_w").data();
    v.out_b = m.view("out_b").data();
    return v;
}

struct EncoderRun {
    std::vector<double> states;  // (m+1) x H; row 0 is the zero initial state
    std::vector<GruStepCache> caches;
    int len{0};
};

void encode(const ExplainerModel& model, const ModelViews& v, const std::vector<int>& input,
            bool keep_caches, EncoderRun& run) {
    const int h = model.cfg.hidden_dim;
    const int d = model.cfg.embed_dim;
    run.len = static_cast<int>(input.size());
    run.states.assign(static_cast<std::size_t>(run.len + 1) * h, 0.0);
    if (keep_caches) run.caches.resize(static_cast<std::size_t>(run.len));
    for (int t = 0; t < run.len; ++t) {
        const double* x = v.embedding + static_cast<std::size_t>(input[static_cast<std::size_t>(t)]) * d;
        gru_forward(v.enc, x, run.states.data() + static_cast<std::size_t>(t) * h, d, h,
                    keep_caches ? &run.caches[static_cast<std::size_t>(t)] : nullptr,
                    run.states.data() + static_cast<std::size_t>(t + 1) * h);
    }
}

struct DecStepCache {
    GruStepCache gru;
    std::vector<double> alpha;  // m
    std::vector<double> ctx;    // H
    std::vector<double> probs;  // V, under the scaled distribution
};

// One decoder step: GRU update, dot attention over encoder states, readout.
// Returns the new state in s_out (H) and the token distribution in probs.
void decode_step(const ExplainerModel& model, const ModelViews& v, const EncoderRun& enc,
                 const double* s_prev, int in_id, double temperature, DecStepCache* cache,
                 double* s_out, std::vector<double>& probs) {
    const int h = model.cfg.hidden_dim;
    const int d = model.cfg.embed_dim;
    const int vocab = model.vocab.size();
    const int m = enc.len;

    const double* x = v.embedding + static_cast<std::size_t>(in_id) * d;
    gru_forward(v.dec, x, s_prev, d, h, cache ? &cache->gru : nullptr, s_out);

    // Dot attention over the encoder states h_1..h_m.
    std::vector<double> scores(static_cast<std::size_t>(m));
    double max_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
        const double* he = enc.states.data() + static_cast<std::size_t>(i + 1) * h;
        double s = 0.0;
        for (int j = 0; j < h; ++j) s += s_out[j] * he[j];
        scores[static_cast<std::size_t>(i)] = s;
        max_score = std::max(max_score, s);
    }
    double denom = 0.0;
    for (int i = 0; i < m; ++i) {
        scores[static_cast<std::size_t>(i)] = std::exp(scores[static_cast<std::size_t>(i)] - max_score);
        denom += scores[static_cast<std::size_t>(i)];
    }
    std::vector<double> alpha(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) alpha[static_cast<std::size_t>(i)] = scores[static_cast<std::size_t>(i)] / denom;

    std::vector<double> ctx(static_cast<std::size_t>(h), 0.0);
    for (int i = 0; i < m; ++i) {
        const double* he = enc.states.data() + static_cast<std::size_t>(i + 1) * h;
        const double a = alpha[static_cast<std::size_t>(i)];
        for (int j = 0; j < h; ++j) ctx[static_cast<std::size_t>(j)] += a * he[j];
    }

    std::vector<double> logits(static_cast<std::size_t>(vocab));
    for (int w = 0; w < vocab; ++w) {
        const double* row = v.out_w + static_cast<std::size_t>(w) * (2 * h);
        double acc = v.out_b[w];
        for (int j = 0; j < h; ++j) acc += row[j] * s_out[j] + row[h + j] * ctx[static_cast<std::size_t>(j)];
        logits[static_cast<std::size_t>(w)] = acc;
    }
    softmax_scaled(logits, temperature, probs);

    if (cache) {
        cache->alpha = std::move(alpha);
        cache->ctx = std::move(ctx);
        cache->probs = probs;
    }
}

}  // namespace

int Vocab::id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk : it->second;
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t max_size) {
    std::map<std::string, long long> freq;
    for (const auto& text : texts) {
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && text[i] == ' ') ++i;
            std::size_t j = i;
            while (j < text.size() && text[j] != ' ') ++j;
            if (j > i) ++freq[text.substr(i, j - i)];
            i = j;
        }
    }
    std::vector<std::pair<std::string, long long>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab v;
    v.id_to_token = {"<pad>", "<bos>", "<eos>", "<sep>", "<unk>"};
    for (const auto& [token, _] : ranked) {
        if (v.id_to_token.size() >= max_size) break;
        v.id_to_token.push_back(token);
    }
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    }
    return v;
}

const ExplainerModel::ParamEntry& ExplainerModel::entry(const std::string& name) const {
    for (const auto& e : layout) {
        if (e.name == name) return e;
    }
    throw std::out_of_range("no parameter array named " + name);
}

std::span<const double> ExplainerModel::view(const std::string& name) const {
    const auto& e = entry(name);
    return {params.data() + e.offset, e.count()};
}

std::span<double> ExplainerModel::view(const std::string& name) {
    const auto& e = entry(name);
    return {params.data() + e.offset, e.count()};
}

ExplainerModel ExplainerModel::init(Vocab vocab, ModelConfig cfg, std::uint64_t seed) {
    ExplainerModel m;
    m.vocab = std::move(vocab);
    m.cfg = cfg;
    m.rng_state = seed;

    const std::size_t v = static_cast<std::size_t>(m.vocab.size());
    const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t h = static_cast<std::size_t>(cfg.hidden_dim);

    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        ParamEntry e{name, m.params.size(), rows, cols};
        m.layout.push_back(e);
        m.params.resize(m.params.size() + rows * cols, 0.0);
    };
    add("embedding", v, d);
    add("enc_w", 3 * h, d);
    add("enc_u", 3 * h, h);
    add("enc_b", 3 * h, 1);
    add("dec_w", 3 * h, d);
    add("dec_u", 3 * h, h);
    add("dec_b", 3 * h, 1);
    add("out_w", v, 2 * h);
    add("out_b", v, 1);

    Rng rng(seed);
    for (const auto& e : m.layout) {
        if (e.name == "enc_b" || e.name == "dec_b" || e.name == "out_b") continue;
        const double scale = 0.1;
        double* p = m.params.data() + e.offset;
        for (std::size_t i = 0; i < e.count(); ++i) p[i] = rng.normal(0.0, scale);
    }
    return m;
}

EncodedInput encode_input(const Vocab& vocab, const ModelConfig& cfg,
                          const text::TokenSequence& question,
                          const text::TokenSequence& paragraphs) {
    if (question.empty()) {
        throw std::invalid_argument("encode_input: empty question");
    }
    EncodedInput out;
    out.ids.push_back(Vocab::bos);
    auto push = [&](const std::string& tok) {
        int id = vocab.id(tok);
        if (id == Vocab::unk) ++out.unknown_count;
        out.ids.push_back(id);
    };
    for (const auto& t : question.tokens) push(t);
    out.ids.push_back(Vocab::sep);
    for (const auto& t : paragraphs.tokens) push(t);
    out.ids.push_back(Vocab::eos);

    const std::size_t limit = static_cast<std::size_t>(cfg.max_input_tokens);
    if (out.ids.size() > limit) {
        out.ids.resize(limit - 1);
        out.ids.push_back(Vocab::eos);
        out.truncated = true;
    }
    return out;
}

std::string Decoded::text(const Vocab& vocab) const {
    std::string out;
    for (int id : ids) {
        if (id == Vocab::pad || id == Vocab::bos || id == Vocab::eos || id == Vocab::sep) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

namespace {

Decoded decode_impl(const ExplainerModel& model, const std::vector<int>& input,
                    double temperature, int limit, Rng* rng) {
    if (limit < 1) throw std::invalid_argument("decode: limit must be >= 1");
    if (temperature <= 0.0) throw std::invalid_argument("decode: temperature must be > 0");
    const ModelViews v = make_views(model);
    EncoderRun enc;
    encode(model, v, input, false, enc);

    const int h = model.cfg.hidden_dim;
    std::vector<double> s(enc.states.end() - h, enc.states.end());
    std::vector<double> s_next(static_cast<std::size_t>(h));
    std::vector<double> probs;

    Decoded out;
    int in_id = Vocab::bos;
    for (int t = 0; t < limit; ++t) {
        decode_step(model, v, enc, s.data(), in_id, temperature, nullptr, s_next.data(), probs);
        int chosen = 0;
        if (rng) {
            const double u = rng->uniform();
            double cum = 0.0;
            chosen = static_cast<int>(probs.size()) - 1;
            for (std::size_t i = 0; i < probs.size(); ++i) {
                cum += probs[i];
                if (u < cum) {
                    chosen = static_cast<int>(i);
                    break;
                }
            }
        } else {
            chosen = static_cast<int>(
                std::max_element(probs.begin(), probs.end()) - probs.begin());
        }
        const double lp = std::log(probs[static_cast<std::size_t>(chosen)]);
        out.ids.push_back(chosen);
        out.token_logprobs.push_back(lp);
        out.seq_logprob += lp;
        if (chosen == Vocab::eos) break;
        in_id = chosen;
        std::swap(s, s_next);
    }
    return out;
}

}  // namespace

Decoded decode_greedy(const ExplainerModel& model, const std::vector<int>& input, int limit) {
    return decode_impl(model, input, 1.0, limit, nullptr);
}

Decoded decode_sample(const ExplainerModel& model, const std::vector<int>& input,
                      double temperature, int limit, Rng& rng) {
    return decode_impl(model, input, temperature, limit, &rng);
}

double sequence_nll(const ExplainerModel& model, const std::vector<int>& input,
                    const std::vector<int>& target, double temperature) {
    if (target.empty()) throw std::invalid_argument("sequence_nll: empty target");
    const ModelViews v = make_views(model);
    EncoderRun enc;
    encode(model, v, input, false, enc);

    const int h = model.cfg.hidden_dim;
    std::vector<double> s(enc.states.end() - h, enc.states.end());
    std::vector<double> s_next(static_cast<std::size_t>(h));
    std::vector<double> probs;

    double nll = 0.0;
    int in_id = Vocab::bos;
    for (std::size_t t = 0; t < target.size(); ++t) {
        decode_step(model, v, enc, s.data(), in_id, temperature, nullptr, s_next.data(), probs);
        nll -= std::log(probs[static_cast<std::size_t>(target[t])]);
        in_id = target[t];
        std::swap(s, s_next);
    }
    return nll;
}

double sequence_nll_backward(const ExplainerModel& model, const std::vector<int>& input,
                             const std::vector<int>& target, double temperature,
                             double weight, std::vector<double>& grad) {
    if (target.empty()) throw std::invalid_argument("sequence_nll_backward: empty target");
    if (grad.size() != model.params.size()) grad.resize(model.params.size(), 0.0);

    const ModelViews v = make_views(model);
    const int h = model.cfg.hidden_dim;
    const int d = model.cfg.embed_dim;
    const int vocab = model.vocab.size();
    const int m = static_cast<int>(input.size());
    const int n = static_cast<int>(target.size());

    EncoderRun enc;
    encode(model, v, input, true, enc);

    // Decoder forward with caches. dec_states row t is s_t; row 0 = s_0.
    std::vector<double> dec_states(static_cast<std::size_t>(n + 1) * h);
    std::copy(enc.states.end() - h, enc.states.end(), dec_states.begin());
    std::vector<DecStepCache> caches(static_cast<std::size_t>(n));
    std::vector<int> dec_inputs(static_cast<std::size_t>(n));
    std::vector<double> probs;
    double nll = 0.0;
    int in_id = Vocab::bos;
    for (int t = 0; t < n; ++t) {
        dec_inputs[static_cast<std::size_t>(t)] = in_id;
        decode_step(model, v, enc, dec_states.data() + static_cast<std::size_t>(t) * h, in_id,
                    temperature, &caches[static_cast<std::size_t>(t)],
                    dec_states.data() + static_cast<std::size_t>(t + 1) * h, probs);
        nll -= std::log(probs[static_cast<std::size_t>(target[static_cast<std::size_t>(t)])]);
        in_id = target[static_cast<std::size_t>(t)];
    }

    // Gradient views.
    auto gview = [&](const char* name) { return grad.data() + model.entry(name).offset; };
    double* g_emb = gview("embedding");
    GruGradView g_enc{gview("enc_w"), gview("enc_u"), gview("enc_b")};
    GruGradView g_dec{gview("dec_w"), gview("dec_u"), gview("dec_b")};
    double* g_out_w = gview("out_w");
    double* g_out_b = gview("out_b");

    std::vector<double> d_enc_states(static_cast<std::size_t>(m + 1) * h, 0.0);
    std::vector<double> ds(static_cast<std::size_t>(h), 0.0);  // dL/ds_t
    std::vector<double> ds_prev(static_cast<std::size_t>(h));
    std::vector<double> dx(static_cast<std::size_t>(d));

    for (int t = n - 1; t >= 0; --t) {
        const DecStepCache& c = caches[static_cast<std::size_t>(t)];
        const double* s_t = dec_states.data() + static_cast<std::size_t>(t + 1) * h;
        const double* s_prev = dec_states.data() + static_cast<std::size_t>(t) * h;
        const int y = target[static_cast<std::size_t>(t)];

        // Readout backward: dlogits = weight * (p - onehot(y)) / temperature.
        std::vector<double> dcat(static_cast<std::size_t>(2 * h), 0.0);
        for (int w = 0; w < vocab; ++w) {
            double dl = weight * c.probs[static_cast<std::size_t>(w)] / temperature;
            if (w == y) dl -= weight / temperature;
            if (dl == 0.0) continue;
            g_out_b[w] += dl;
            const double* row = v.out_w + static_cast<std::size_t>(w) * (2 * h);
            double* grow = g_out_w + static_cast<std::size_t>(w) * (2 * h);
            for (int j = 0; j < h; ++j) {
                grow[j] += dl * s_t[j];
                grow[h + j] += dl * c.ctx[static_cast<std::size_t>(j)];
                dcat[static_cast<std::size_t>(j)] += dl * row[j];
                dcat[static_cast<std::size_t>(h + j)] += dl * row[h + j];
            }
        }
        for (int j = 0; j < h; ++j) ds[static_cast<std::size_t>(j)] += dcat[static_cast<std::size_t>(j)];
        const double* dctx = dcat.data() + h;

        // Attention backward.
        std::vector<double> dalpha(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i < m; ++i) {
            const double* he = enc.states.data() + static_cast<std::size_t>(i + 1) * h;
            double acc = 0.0;
            const double a = c.alpha[static_cast<std::size_t>(i)];
            double* dhe = d_enc_states.data() + static_cast<std::size_t>(i + 1) * h;
            for (int j = 0; j < h; ++j) {
                acc += dctx[j] * he[j];
                dhe[j] += a * dctx[j];
            }
            dalpha[static_cast<std::size_t>(i)] = acc;
        }
        double inner = 0.0;
        for (int i = 0; i < m; ++i) {
            inner += c.alpha[static_cast<std::size_t>(i)] * dalpha[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < m; ++i) {
            const double de = c.alpha[static_cast<std::size_t>(i)] *
                              (dalpha[static_cast<std::size_t>(i)] - inner);
            if (de == 0.0) continue;
            const double* he = enc.states.data() + static_cast<std::size_t>(i + 1) * h;
            double* dhe = d_enc_states.data() + static_cast<std::size_t>(i + 1) * h;
            for (int j = 0; j < h; ++j) {
                ds[static_cast<std::size_t>(j)] += de * he[j];
                dhe[j] += de * s_t[j];
            }
        }

        // Decoder GRU backward.
        std::fill(ds_prev.begin(), ds_prev.end(), 0.0);
        std::fill(dx.begin(), dx.end(), 0.0);
        const int xid = dec_inputs[static_cast<std::size_t>(t)];
        const double* x = v.embedding + static_cast<std::size_t>(xid) * d;
        gru_backward(v.dec, g_dec, c.gru, x, s_prev, ds.data(), d, h, ds_prev.data(), dx.data());
        double* ge = g_emb + static_cast<std::size_t>(xid) * d;
        for (int j = 0; j < d; ++j) ge[j] += dx[j];
        std::swap(ds, ds_prev);
    }

    // s_0 is the last encoder state.
    {
        double* dhe_last = d_enc_states.data() + static_cast<std::size_t>(m) * h;
        for (int j = 0; j < h; ++j) dhe_last[j] += ds[static_cast<std::size_t>(j)];
    }

    // Encoder backward.
    std::vector<double> dh(static_cast<std::size_t>(h), 0.0);
    for (int t = m - 1; t >= 0; --t) {
        for (int j = 0; j < h; ++j) {
            dh[static_cast<std::size_t>(j)] =
                d_enc_states[static_cast<std::size_t>(t + 1) * h + static_cast<std::size_t>(j)];
        }
        std::fill(ds_prev.begin(), ds_prev.end(), 0.0);
        std::fill(dx.begin(), dx.end(), 0.0);
        const int xid = input[static_cast<std::size_t>(t)];
        const double* x = v.embedding + static_cast<std::size_t>(xid) * d;
        const double* h_prev = enc.states.data() + static_cast<std::size_t>(t) * h;
        gru_backward(v.enc, g_enc, enc.caches[static_cast<std::size_t>(t)], x, h_prev, dh.data(),
                     d, h, ds_prev.data(), dx.data());
        double* ge = g_emb + static_cast<std::size_t>(xid) * d;
        for (int j = 0; j < d; ++j) ge[j] += dx[j];
        for (int j = 0; j < h; ++j) {
            d_enc_states[static_cast<std::size_t>(t) * h + static_cast<std::size_t>(j)] +=
                ds_prev[static_cast<std::size_t>(j)];
        }
    }
    return nll;
}

LossGrads loss_ml(const ExplainerModel& model, const std::vector<MLItem>& batch) {
    std::size_t total_tokens = 0;
    for (const auto& item : batch) total_tokens += item.gold.size();
    if (total_tokens == 0) throw std::invalid_argument("loss_ml: batch has no gold tokens");

    LossGrads out;
    out.grads.assign(model.params.size(), 0.0);
    const double w = 1.0 / static_cast<double>(total_tokens);
    for (const auto& item : batch) {
        out.loss += w * sequence_nll_backward(model, item.input, item.gold, 1.0, w, out.grads);
    }
    return out;
}

LossGrads loss_rl(const ExplainerModel& model, const std::vector<RLItem>& batch,
                  const reward::RLConfig& config) {
    if (batch.empty()) throw std::invalid_argument("loss_rl: empty batch");
    LossGrads out;
    out.grads.assign(model.params.size(), 0.0);
    const double bn = static_cast<double>(batch.size());
    for (const auto& item : batch) {
        if (item.sampled.empty()) continue;
        const double nll = sequence_nll(model, item.input, item.sampled, config.sample_temperature);
        const double tol = 1e-6 * std::max(1.0, std::abs(item.sampled_seq_logprob));
        if (std::abs(-nll - item.sampled_seq_logprob) > tol) {
            throw std::logic_error(
                "loss_rl: sampled sequence does not match the current parameter snapshot");
        }
        const double advantage =
            std::max(item.reward_sampled - item.reward_greedy, config.advantage_clip_min);
        const double n = static_cast<double>(item.sampled.size());
        out.loss += advantage * nll / n / bn;
        if (advantage != 0.0) {
            sequence_nll_backward(model, item.input, item.sampled, config.sample_temperature,
                                  advantage / n / bn, out.grads);
        }
    }
    return out;
}

namespace {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t{0};
};

void optimizer_update(std::vector<double>& params, const std::vector<double>& grads,
                      const TrainConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == "sgd") {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grads[i];
        return;
    }
    if (cfg.optimizer != "adam") {
        throw std::invalid_argument("unknown optimizer: " + cfg.optimizer);
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    if (adam.m.size() != params.size()) {
        adam.m.assign(params.size(), 0.0);
        adam.v.assign(params.size(), 0.0);
        adam.t = 0;
    }
    ++adam.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grads[i];
        adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = adam.m[i] / bc1;
        const double vhat = adam.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
    }
}

double validation_nll(const ExplainerModel& model, const std::vector<MLItem>& items) {
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& item : items) {
        nll += sequence_nll(model, item.input, item.gold, 1.0);
        tokens += item.gold.size();
    }
    return nll / static_cast<double>(tokens);
}

std::vector<MLItem> gold_items(const std::vector<TrainItem>& items) {
    std::vector<MLItem> out;
    for (const auto& item : items) {
        if (item.gold && !item.gold->empty()) out.push_back({item.input, *item.gold});
    }
    return out;
}

}  // namespace

SupervisedResult train_supervised(ExplainerModel model, const std::vector<TrainItem>& train,
                                  const std::vector<TrainItem>& val, const TrainConfig& config) {
    const std::vector<MLItem> train_items = gold_items(train);
    const std::vector<MLItem> val_items = gold_items(val);
    if (train_items.empty()) {
        throw std::invalid_argument("train_supervised: no gold explanations in training split");
    }
    if (val_items.empty()) {
        throw std::invalid_argument("train_supervised: no validation split");
    }

    Rng rng(config.rng_seed);
    AdamState adam;
    EarlyStopper stopper(config.patience);
    SupervisedResult result;
    result.model = model;
    result.best_val_nll = validation_nll(model, val_items);
    stopper.observe(result.best_val_nll);

    std::vector<std::size_t> order(train_items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int steps = 0;
    int since_check = 0;
    bool stop = false;
    for (int epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size() && !stop;
             start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<MLItem> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                 ++i) {
                batch.push_back(train_items[order[i]]);
            }
            LossGrads lg = loss_ml(model, batch);
            optimizer_update(model.params, lg.grads, config, adam);
            ++steps;
            ++since_check;

            const bool end_of_epoch = start + static_cast<std::size_t>(config.batch_size) >= order.size();
            const bool check_now = config.validate_every > 0
                                       ? since_check >= config.validate_every
                                       : end_of_epoch;
            if (!check_now) continue;
            since_check = 0;
            const double val_nll = validation_nll(model, val_items);
            ++result.validation_checks;
            const bool should_stop = stopper.observe(val_nll);
            if (stopper.improved_last()) {
                result.model = model;
                result.best_val_nll = val_nll;
            }
            if (should_stop) {
                result.early_stopped = true;
                stop = true;
            }
        }
    }
    result.steps = steps;
    return result;
}

JointTrainer::JointTrainer(ExplainerModel model, TrainConfig train_cfg, reward::RLConfig rl_cfg,
                           AnswerOracle& oracle, AcceptabilityScorer& acceptability)
    : model_(std::move(model)),
      train_cfg_(std::move(train_cfg)),
      rl_cfg_(rl_cfg),
      oracle_(oracle),
      acceptability_(acceptability),
      rng_(rl_cfg.rng_seed) {}

void JointTrainer::apply_update(const std::vector<double>& grads) {
    AdamState state;
    state.m = std::move(adam_m_);
    state.v = std::move(adam_v_);
    state.t = adam_t_;
    optimizer_update(model_.params, grads, train_cfg_, state);
    adam_m_ = std::move(state.m);
    adam_v_ = std::move(state.v);
    adam_t_ = state.t;
}

StepDiagnostics JointTrainer::step(const std::vector<const TrainItem*>& batch) {
    if (batch.empty()) throw std::invalid_argument("JointTrainer::step: empty batch");
    StepDiagnostics diag;
    diag.batch_size = static_cast<int>(batch.size());

    std::vector<RLItem> rl_items;
    std::vector<MLItem> ml_items;
    const auto& names = reward::RewardBreakdown::element_names();
    for (const char* name : names) diag.elemental_means[name] = 0.0;

    for (const TrainItem* item : batch) {
        Decoded greedy = decode_greedy(model_, item->input, rl_cfg_.max_explanation_tokens);
        Decoded sampled = decode_sample(model_, item->input, rl_cfg_.sample_temperature,
                                        rl_cfg_.max_explanation_tokens, rng_);

        const reward::RewardBreakdown r_greedy = reward::score_explanation(
            item->reward_ctx, greedy.text(model_.vocab), greedy.seq_logprob, rl_cfg_, oracle_,
            acceptability_);
        const reward::RewardBreakdown r_sampled = reward::score_explanation(
            item->reward_ctx, sampled.text(model_.vocab), sampled.seq_logprob, rl_cfg_, oracle_,
            acceptability_);

        diag.mean_reward_greedy += r_greedy.combined;
        diag.mean_reward_sampled += r_sampled.combined;
        const auto elems = r_sampled.elements();
        for (std::size_t i = 0; i < elems.size(); ++i) diag.elemental_means[names[i]] += elems[i];

        if (!sampled.ids.empty()) {
            rl_items.push_back({item->input, sampled.ids, sampled.seq_logprob,
                                r_sampled.combined, r_greedy.combined});
        }
        if (item->gold && !item->gold->empty()) {
            ml_items.push_back({item->input, *item->gold});
        }
    }
    const double bn = static_cast<double>(batch.size());
    diag.mean_reward_greedy /= bn;
    diag.mean_reward_sampled /= bn;
    for (auto& [_, v] : diag.elemental_means) v /= bn;
    diag.ml_items = static_cast<int>(ml_items.size());

    std::vector<double> grads(model_.params.size(), 0.0);
    if (!rl_items.empty()) {
        LossGrads rl = loss_rl(model_, rl_items, rl_cfg_);
        diag.loss_rl = rl.loss;
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += rl.grads[i];
    }
    if (rl_cfg_.lambda_ml > 0.0 && !ml_items.empty()) {
        LossGrads ml = loss_ml(model_, ml_items);
        diag.loss_ml = ml.loss;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            grads[i] += rl_cfg_.lambda_ml * ml.grads[i];
        }
    }
    apply_update(grads);
    return diag;
}

void save_checkpoint(const ExplainerModel& model, const std::string& path,
                     const std::string& config_echo_json) {
    json j;
    j["format_version"] = 1;
    j["model_config"] = {{"embed_dim", model.cfg.embed_dim},
                         {"hidden_dim", model.cfg.hidden_dim},
                         {"max_input_tokens", model.cfg.max_input_tokens}};
    j["vocab"] = model.vocab.id_to_token;
    j["rng_state"] = model.rng_state;
    json params = json::object();
    for (const auto& e : model.layout) {
        params[e.name] = std::vector<double>(model.params.begin() + static_cast<long>(e.offset),
                                             model.params.begin() +
                                                 static_cast<long>(e.offset + e.count()));
    }
    j["params"] = std::move(params);
    if (!config_echo_json.empty()) {
        j["config_echo"] = json::parse(config_echo_json);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(1) << '\n';
}

ExplainerModel load_checkpoint(const std::string& path, std::string* config_echo_json) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    json j;
    in >> j;
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
        throw std::runtime_error("unsupported checkpoint version in " + path);
    }
    ModelConfig cfg;
    cfg.embed_dim = j["model_config"]["embed_dim"].get<int>();
    cfg.hidden_dim = j["model_config"]["hidden_dim"].get<int>();
    cfg.max_input_tokens = j["model_config"]["max_input_tokens"].get<int>();

    Vocab vocab;
    vocab.id_to_token = j["vocab"].get<std::vector<std::string>>();
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
    }

    ExplainerModel model = ExplainerModel::init(std::move(vocab), cfg, 0);
    model.rng_state = j["rng_state"].get<std::uint64_t>();
    for (const auto& e : model.layout) {
        const auto values = j["params"].at(e.name).get<std::vector<double>>();
        if (values.size() != e.count()) {
            throw std::runtime_error("checkpoint parameter size mismatch for " + e.name);
        }
        std::copy(values.begin(), values.end(), model.params.begin() + static_cast<long>(e.offset));
    }
    if (config_echo_json) {
        *config_echo_json = j.contains("config_echo") ? j["config_echo"].dump() : "";
    }
    return model;
}

}  // namespace exqa::explainer
