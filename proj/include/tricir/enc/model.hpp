#pragma once

#include <json.hpp>

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/core/embedding.hpp"
#include "tricir/graph/circuit_graph.hpp"
#include "tricir/nn/ops.hpp"
#include "tricir/nn/params.hpp"

namespace tricir::enc {

class EmptyGraph : public std::runtime_error {
 public:
  explicit EmptyGraph(const std::string& msg) : std::runtime_error(msg) {}
};

class EmptyInput : public std::runtime_error {
 public:
  explicit EmptyInput(const std::string& msg) : std::runtime_error(msg) {}
};

class RelationOutOfRange : public std::runtime_error {
 public:
  explicit RelationOutOfRange(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelConfig {
  int d_g = 512;          // graph-encoder hidden width
  int d_type = 64;        // component-type embedding
  int d_cont = 64;        // continuous-parameter features
  int rgcn_layers = 2;
  bool graph_norm = true;
  int proj_hidden = 1024;
  int d_embed = 768;      // shared space
  int text_vocab = 8192;
  int text_dim = 256;
  int image_dim = 512;    // precomputed image-feature dimension
  double dropout = 0.1;
  int num_classes = 19;   // auxiliary topology classifier
  double logit_scale_init = 1.0 / 0.07;
  double logit_scale_max = 100.0;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

inline nlohmann::json ModelConfig::to_json() const {
  return {{"d_g", d_g},           {"d_type", d_type},
          {"d_cont", d_cont},     {"rgcn_layers", rgcn_layers},
          {"graph_norm", graph_norm}, {"proj_hidden", proj_hidden},
          {"d_embed", d_embed},   {"text_vocab", text_vocab},
          {"text_dim", text_dim}, {"image_dim", image_dim},
          {"dropout", dropout},   {"num_classes", num_classes},
          {"logit_scale_init", logit_scale_init},
          {"logit_scale_max", logit_scale_max}};
}

inline ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  get("d_g", c.d_g);
  get("d_type", c.d_type);
  get("d_cont", c.d_cont);
  get("rgcn_layers", c.rgcn_layers);
  get("graph_norm", c.graph_norm);
  get("proj_hidden", c.proj_hidden);
  get("d_embed", c.d_embed);
  get("text_vocab", c.text_vocab);
  get("text_dim", c.text_dim);
  get("image_dim", c.image_dim);
  get("dropout", c.dropout);
  get("num_classes", c.num_classes);
  get("logit_scale_init", c.logit_scale_init);
  get("logit_scale_max", c.logit_scale_max);
  return c;
}

// Whitespace tokenizer with hashed vocabulary; lower-cases and keeps
// [a-z0-9 . + -] so value tokens like "2.2k" survive.
std::vector<int> tokenize(const std::string& caption, int vocab_size);

// A batch of circuit graphs merged into one disjoint union.
struct GraphBatch {
  int num_graphs = 0;
  int num_nodes = 0;
  std::vector<int> kinds;               // per node
  MatD cont_log;                        // per node, log1p of rescaled slots
  std::vector<int> graph_of_node;       // segment ids
  // per relation: parallel src/dst node index lists
  std::vector<std::vector<int>> src_by_rel;
  std::vector<std::vector<int>> dst_by_rel;
};

GraphBatch make_graph_batch(const std::vector<const graph::CircuitGraph*>& graphs);

struct TextBatch {
  int num_texts = 0;
  std::vector<int> token_ids;       // flattened
  std::vector<int> text_of_token;   // segment ids
};

TextBatch make_text_batch(const std::vector<std::vector<int>>& token_lists);

// The three modality encoders over one parameter store. Parameter groups:
//   graph.*  (featurizer, rgcn, attention pool, projection head)
//   text.embed / text.proj
//   image.proj
//   objective.*  (logit scale, auxiliary classifier)
template <typename S>
class TriModalModel {
 public:
  TriModalModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    using nn::init_constant;
    using nn::init_glorot;
    using nn::init_normal;
    auto& P = store_;
    const int kinds = spice::kNumDeviceKinds;
    P.add("graph.featurizer.type_embed", "graph",
          init_normal<S>(kinds, cfg.d_type, 0.2, seed, "graph.featurizer.type_embed"));
    P.add("graph.featurizer.cont_w", "graph",
          init_glorot<S>(graph::kNumContSlots, cfg.d_cont, seed, "graph.featurizer.cont_w"));
    P.add("graph.featurizer.cont_b", "graph", init_constant<S>(1, cfg.d_cont, 0.0));
    P.add("graph.featurizer.fuse", "graph",
          init_glorot<S>(cfg.d_type + cfg.d_cont, cfg.d_g, seed, "graph.featurizer.fuse"));
    for (int l = 0; l < cfg.rgcn_layers; ++l) {
      for (int r = 0; r < graph::kNumRelations; ++r) {
        std::string name = layer_rel_name(l, r);
        P.add(name, "graph", init_glorot<S>(cfg.d_g, cfg.d_g, seed, name));
      }
      std::string base = "graph.rgcn.l" + std::to_string(l);
      P.add(base + ".norm_gamma", "graph", init_constant<S>(1, cfg.d_g, 1.0));
      P.add(base + ".norm_beta", "graph", init_constant<S>(1, cfg.d_g, 0.0));
      P.add(base + ".norm_alpha", "graph", init_constant<S>(1, cfg.d_g, 1.0));
    }
    P.add("graph.pool.w", "graph", init_constant<S>(cfg.d_g, 1, 0.0));
    P.add("graph.proj.w1", "graph",
          init_glorot<S>(cfg.d_g, cfg.proj_hidden, seed, "graph.proj.w1"));
    P.add("graph.proj.b1", "graph", init_constant<S>(1, cfg.proj_hidden, 0.0));
    P.add("graph.proj.ln_gamma", "graph", init_constant<S>(1, cfg.proj_hidden, 1.0));
    P.add("graph.proj.ln_beta", "graph", init_constant<S>(1, cfg.proj_hidden, 0.0));
    P.add("graph.proj.w2", "graph",
          init_glorot<S>(cfg.proj_hidden, cfg.d_embed, seed, "graph.proj.w2"));
    P.add("graph.proj.b2", "graph", init_constant<S>(1, cfg.d_embed, 0.0));

    P.add("text.embed.table", "text.embed",
          init_normal<S>(cfg.text_vocab, cfg.text_dim, 1.0, seed, "text.embed.table"));
    P.add("text.proj.w", "text.proj",
          init_glorot<S>(cfg.text_dim, cfg.d_embed, seed, "text.proj.w"));
    P.add("text.proj.b", "text.proj",
          init_normal<S>(1, cfg.d_embed, 0.01, seed, "text.proj.b"));

    P.add("image.proj.w", "image.proj",
          init_glorot<S>(cfg.image_dim, cfg.d_embed, seed, "image.proj.w"));
    P.add("image.proj.b", "image.proj",
          init_normal<S>(1, cfg.d_embed, 0.01, seed, "image.proj.b"));

    P.add("objective.logit_scale", "objective",
          init_constant<S>(1, 1, cfg.logit_scale_init));
    P.add("objective.cls.w1", "objective",
          init_glorot<S>(cfg.d_embed, 256, seed, "objective.cls.w1"));
    P.add("objective.cls.b1", "objective", init_constant<S>(1, 256, 0.0));
    P.add("objective.cls.w2", "objective",
          init_glorot<S>(256, cfg.num_classes, seed, "objective.cls.w2"));
    P.add("objective.cls.b2", "objective", init_constant<S>(1, cfg.num_classes, 0.0));
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore<S>& store() { return store_; }
  const nn::ParamStore<S>& store() const { return store_; }

  void set_trainable(const std::string& group, bool flag) {
    store_.set_trainable(group, flag);
  }

  // Clamp the learnable inverse temperature into (0, logit_scale_max];
  // applied after every optimizer step.
  void clamp_logit_scale() {
    S& v = store_.at("objective.logit_scale").value(0, 0);
    if (v > static_cast<S>(cfg_.logit_scale_max)) v = static_cast<S>(cfg_.logit_scale_max);
    if (v < static_cast<S>(1e-3)) v = static_cast<S>(1e-3);
  }

  // ---- batched forward paths (tape-tracked) ----

  // Node features (Emb(type) || Linear(log1p(cont))) through W_fuse, then the
  // relational message-passing layers: h' = GraphNorm(gelu(sum_r W_r . mean_r)) + h.
  nn::Var<S> graph_node_states(nn::Tape<S>& t, const GraphBatch& b) {
    if (b.num_nodes == 0) throw EmptyGraph("graph batch with no nodes");
    using namespace tricir::nn;
    auto bind = [&](const char* n) { return store_.at(n).bind(t); };

    Var<S> emb = gather_rows(bind("graph.featurizer.type_embed"), b.kinds);
    Var<S> cont_in = t.constant(b.cont_log.template cast<S>());
    Var<S> cont = add(matmul(cont_in, bind("graph.featurizer.cont_w")),
                      bind("graph.featurizer.cont_b"));
    Var<S> h = matmul(concat_cols(emb, cont), bind("graph.featurizer.fuse"));

    for (int l = 0; l < cfg_.rgcn_layers; ++l) {
      Var<S> agg;
      bool have = false;
      for (int r = 0; r < graph::kNumRelations; ++r) {
        if (b.src_by_rel[r].empty()) continue;
        Var<S> msgs = gather_rows(h, b.src_by_rel[r]);
        Var<S> mean_in = segment_mean(msgs, b.dst_by_rel[r], b.num_nodes);
        Var<S> transformed = matmul(mean_in, store_.at(layer_rel_name(l, r)).bind(t));
        agg = have ? add(agg, transformed) : transformed;
        have = true;
      }
      if (!have) agg = t.constant(MatR<S>::Zero(b.num_nodes, cfg_.d_g));
      Var<S> act = gelu(agg);
      std::string base = "graph.rgcn.l" + std::to_string(l);
      Var<S> normed =
          cfg_.graph_norm
              ? graph_norm(act, b.graph_of_node, b.num_graphs, bind((base + ".norm_gamma").c_str()),
                           bind((base + ".norm_beta").c_str()),
                           bind((base + ".norm_alpha").c_str()))
              : act;
      h = add(normed, h);
    }
    return h;
  }

  // Attention pool: alpha_v = softmax over nodes of w . h_v within a graph.
  nn::Var<S> attention_pool(nn::Tape<S>& t, nn::Var<S> h, const GraphBatch& b) {
    if (b.num_nodes == 0) throw EmptyGraph("attention pool over empty batch");
    using namespace tricir::nn;
    Var<S> logits = matmul(h, store_.at("graph.pool.w").bind(t));
    Var<S> weights = segment_softmax(logits, b.graph_of_node, b.num_graphs);
    return segment_sum(mul_colvec(h, weights), b.graph_of_node, b.num_graphs);
  }

  nn::Var<S> encode_circuit_batch(nn::Tape<S>& t, const GraphBatch& b, bool training,
                                  std::uint64_t* dropout_state) {
    using namespace tricir::nn;
    auto bind = [&](const char* n) { return store_.at(n).bind(t); };
    Var<S> pooled = attention_pool(t, graph_node_states(t, b), b);
    Var<S> z = add(matmul(pooled, bind("graph.proj.w1")), bind("graph.proj.b1"));
    z = layer_norm(z, bind("graph.proj.ln_gamma"), bind("graph.proj.ln_beta"));
    z = gelu(z);
    if (training && dropout_state)
      z = dropout(z, cfg_.dropout, *dropout_state, true);
    z = add(matmul(z, bind("graph.proj.w2")), bind("graph.proj.b2"));
    return l2_normalize_rows(z);
  }

  nn::Var<S> encode_text_batch(nn::Tape<S>& t, const TextBatch& b) {
    if (b.num_texts == 0 || b.token_ids.empty())
      throw EmptyInput("text batch with no tokens");
    using namespace tricir::nn;
    Var<S> emb = gather_rows(store_.at("text.embed.table").bind(t), b.token_ids);
    Var<S> pooled = segment_mean(emb, b.text_of_token, b.num_texts);
    Var<S> z = add(matmul(pooled, store_.at("text.proj.w").bind(t)),
                   store_.at("text.proj.b").bind(t));
    return l2_normalize_rows(z);
  }

  nn::Var<S> encode_image_batch(nn::Tape<S>& t, const MatR<S>& features) {
    if (features.rows() == 0) throw EmptyInput("image batch with no rows");
    if (features.cols() != cfg_.image_dim)
      throw nn::ShapeMismatch("image features must have dim " +
                              std::to_string(cfg_.image_dim));
    if (!features.allFinite()) throw EmptyInput("non-finite image features");
    using namespace tricir::nn;
    Var<S> z = add(matmul(t.constant(features), store_.at("image.proj.w").bind(t)),
                   store_.at("image.proj.b").bind(t));
    return l2_normalize_rows(z);
  }

  // auxiliary topology classifier head (applied to text/code embeddings)
  nn::Var<S> classify(nn::Tape<S>& t, nn::Var<S> emb) {
    using namespace tricir::nn;
    Var<S> z = add(matmul(emb, store_.at("objective.cls.w1").bind(t)),
                   store_.at("objective.cls.b1").bind(t));
    z = gelu(z);
    return add(matmul(z, store_.at("objective.cls.w2").bind(t)),
               store_.at("objective.cls.b2").bind(t));
  }

  nn::Var<S> logit_scale(nn::Tape<S>& t) {
    return store_.at("objective.logit_scale").bind(t);
  }

  // ---- inference conveniences (no gradients, dropout off) ----

  Embedding encode_circuit(const graph::CircuitGraph& g) {
    if (g.num_nodes() == 0) throw EmptyGraph("empty circuit graph");
    nn::Tape<S> t;
    GraphBatch b = make_graph_batch({&g});
    nn::Var<S> v = encode_circuit_batch(t, b, false, nullptr);
    return wrap(v, Modality::Code);
  }

  Embedding encode_text(const std::string& caption) {
    std::vector<int> toks = tokenize(caption, cfg_.text_vocab);
    if (toks.empty()) throw EmptyInput("caption has no tokens");
    nn::Tape<S> t;
    TextBatch b = make_text_batch({toks});
    return wrap(encode_text_batch(t, b), Modality::Text);
  }

  Embedding encode_image_features(const std::vector<float>& feat) {
    if (static_cast<int>(feat.size()) != cfg_.image_dim)
      throw nn::ShapeMismatch("image feature size != configured dim");
    MatR<S> m(1, cfg_.image_dim);
    for (int i = 0; i < cfg_.image_dim; ++i) m(0, i) = static_cast<S>(feat[i]);
    nn::Tape<S> t;
    return wrap(encode_image_batch(t, m), Modality::Image);
  }

  static std::string layer_rel_name(int layer, int rel) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "graph.rgcn.l%d.w%02d", layer, rel);
    return buf;
  }

 private:
  Embedding wrap(nn::Var<S> v, Modality m) const {
    Embedding e;
    e.modality = m;
    e.vec.resize(v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      e.vec(j) = static_cast<float>(v.value()(0, j));
    return e;
  }

  ModelConfig cfg_;
  nn::ParamStore<S> store_;
};

}  // namespace tricir::enc
