#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lq/autodiff.hpp"
#include "lq/crossfield.hpp"
#include "lq/mesh.hpp"
#include "lq/query_graph.hpp"
#include "lq/sampling.hpp"

namespace lq {

// Architecture plus the input contract the weights were trained with.
struct ModelConfig {
  int width = 64;
  int heads = 4;
  int enc_self_layers = 2;
  int dec_cross_layers = 2;
  int ffn_mult = 2;
  int frequencies = 6;
  double w_prior = 0.2;

  double tau_degrees = 30.0;
  int n_desire = 16384;
  int n_uniform_anchors = 2048;
  int n_salient_anchors = 2048;
  int neighbor_cap = kDefaultNeighborCap;

  int feature_dim() const { return 9 + 6 * frequencies; }
  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

// Per-point features: normalized position, sin/cos of the position at
// frequencies pi 2^k, normal, tangent (zero rows when `tangents` is empty).
ad::Mat point_features(std::span<const Vec3> positions, std::span<const Vec3> normals,
                       std::span<const Vec3> tangents, const Vec3& center, double scale,
                       int frequencies);

// Everything the network reads from one mesh. Row i of the edge/face query
// blocks is edge/face i.
struct MeshInputs {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;
  SaliencyInfo saliency;
  PointSet uniform_pool;
  PointSet salient_pool;
  AnchorSet anchors;
  ad::Mat anchor_feat;
  ad::Mat uniform_feat;
  ad::Mat salient_feat;
  ad::Mat edge_query_feat;
  ad::Mat face_query_feat;
  ad::Mat point_table_feat;  // NeighborPointTable order
  ad::Mat face_table_feat;   // face centroids
  ad::Csr edge_lists;        // into point table; own midpoint first
  ad::Csr face_lists;        // into face table
  std::vector<char> prior;   // per edge
};

MeshInputs prepare_inputs(const TriMesh& mesh, const ModelConfig& cfg, uint64_t seed);

// Row subset of a Csr.
ad::Csr select_rows(const ad::Csr& lists, std::span<const int> rows);
ad::Mat select_rows(const ad::Mat& m, std::span<const int> rows);

class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<ad::Param>& params() { return params_; }
  const std::vector<ad::Param>& params() const { return params_; }
  ad::Param& param(const std::string& name);
  size_t num_scalars() const;

  enum class Embedder { kSurface, kToken };
  enum class QueryKind { kEdge, kFace };

  ad::Var embed(ad::Graph& g, Embedder which, const ad::Mat& features);
  // Latent code Z, one row per anchor. Throws std::invalid_argument on an
  // empty anchor set.
  ad::Var encode(ad::Graph& g, const ad::Mat& anchor_feat, const ad::Mat& uniform_feat,
                 const ad::Mat& salient_feat);

  // Keys and values of the table tokens, reusable across query chunks.
  struct TableKV {
    ad::Var k, v;
  };
  TableKV local_table(ad::Graph& g, QueryKind kind, const ad::Mat& table_feat);
  ad::Var local_context(ad::Graph& g, QueryKind kind, const ad::Mat& query_feat, TableKV table,
                        const ad::Csr& lists);

  // Raw logits S (n x 1) before the prior bias.
  ad::Var struct_logits(ad::Graph& g, ad::Var x_e, ad::Var z);
  // logistic(S + w_prior * flag).
  ad::Var decode_struct(ad::Graph& g, ad::Var x_e, ad::Var z, std::span<const char> prior);
  // (n x 4) polyvector reals.
  ad::Var decode_field(ad::Graph& g, ad::Var x_f, ad::Var z);

 private:
  struct Linear {
    int w = -1, b = -1;
  };
  struct Norm {
    int g = -1, b = -1;
  };
  struct Attn {
    Linear q, k, v, o;
  };
  struct Block {
    Norm ln_q, ln_kv, ln_ff;
    Attn attn;
    Linear ff1, ff2;
  };

  int add_param(const std::string& name, ad::Mat value);
  Linear make_linear(const std::string& name, int in, int out, uint64_t& seed);
  Norm make_norm(const std::string& name, int dim);
  Block make_block(const std::string& name, bool cross, uint64_t& seed);

  ad::Var P(ad::Graph& g, int idx) { return g.param(params_[idx]); }
  ad::Var apply(ad::Graph& g, const Linear& l, ad::Var x);
  ad::Var apply(ad::Graph& g, const Norm& n, ad::Var x);
  ad::Var feed_forward(ad::Graph& g, const Block& b, ad::Var x);
  // Pre-norm residual block; `kv` equal to `x` (same id) means self-attention.
  ad::Var block(ad::Graph& g, const Block& b, ad::Var x, ad::Var kv, bool cross);

  ModelConfig cfg_;
  std::vector<ad::Param> params_;
  Linear surface_embed_, token_embed_;
  Block enc_cross_u_, enc_cross_a_;
  std::vector<Block> enc_self_;
  Block local_edge_, local_face_;
  std::vector<Block> dec_struct_, dec_field_;
  Norm struct_norm_, field_norm_, latent_norm_;
  Linear struct_head_, field_head_;

  friend void save_checkpoint(const std::filesystem::path&, const Model&);
  friend Model load_checkpoint(const std::filesystem::path&);
};

struct Prediction {
  std::vector<double> edge_prob;           // per edge
  std::vector<FieldTarget> polyvectors;    // per face
  CrossField field;                        // decoded; invalid where |c1| <= 1e-12
  std::vector<int> decode_failures;        // faces whose polyvector did not decode
};

// Full inference over every edge and face, queries processed in chunks.
Prediction predict(const TriMesh& mesh, Model& model, uint64_t seed, int chunk = 2048);
Prediction predict(const TriMesh& mesh, const MeshInputs& inputs, Model& model, int chunk = 2048);

// Versioned binary: magic, version, config, then every tensor with its name
// and shape. Throws std::runtime_error on malformed files.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a of a file's bytes.
uint64_t file_hash(const std::filesystem::path& path);

}  // namespace lq
