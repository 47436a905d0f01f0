#include "mmpoint/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace mmpoint::heads {

ProjectionConfig default_projection(int m, int d_in, int d_intra) {
  if (m < 1) throw std::invalid_argument("default_projection: m must be >= 1");
  ProjectionConfig cfg;
  cfg.d_in = d_in;
  cfg.d_intra = d_intra;
  for (int j = 0; j < m; ++j) cfg.d_cross.push_back(d_intra + 128 + 64 * j);
  return cfg;
}

void validate_config(const ProjectionConfig& cfg) {
  if (cfg.d_in < 1) throw std::invalid_argument("projection config: d_in must be >= 1");
  if (cfg.d_intra < 1) throw std::invalid_argument("projection config: d_intra must be >= 1");
  if (cfg.d_cross.empty())
    throw std::invalid_argument("projection config: needs at least one cross-modal level");
  for (size_t j = 0; j < cfg.d_cross.size(); ++j) {
    if (cfg.d_cross[j] <= cfg.d_intra)
      throw std::invalid_argument("projection config: d_cross[" + std::to_string(j + 1) +
                                  "]=" + std::to_string(cfg.d_cross[j]) +
                                  " must exceed d_intra=" + std::to_string(cfg.d_intra));
    if (j > 0 && cfg.d_cross[j] < cfg.d_cross[j - 1])
      throw std::invalid_argument("projection config: d_cross must be non-decreasing, got " +
                                  std::to_string(cfg.d_cross[j - 1]) + " then " +
                                  std::to_string(cfg.d_cross[j]));
  }
}

Mlp2 make_mlp2(ParamStore& store, const std::string& prefix, int d_in, int d_out, Stream& init) {
  if (d_in < 1 || d_out < 1) throw std::invalid_argument("make_mlp2: bad dimensions");
  double s1 = std::sqrt(2.0 / d_in);
  Tensor w1({d_in, d_in});
  for (auto& v : w1.data) v = init.normal(0.0, s1);
  Tensor w2({d_in, d_out});
  for (auto& v : w2.data) v = init.normal(0.0, s1);
  Mlp2 h;
  h.d_in = d_in;
  h.d_out = d_out;
  h.w1 = store.add(prefix + "/w1", std::move(w1));
  h.b1 = store.add(prefix + "/b1", Tensor::zeros({d_in}));
  h.w2 = store.add(prefix + "/w2", std::move(w2));
  h.b2 = store.add(prefix + "/b2", Tensor::zeros({d_out}));
  return h;
}

int project(Tape& t, TapeBinding& bind, const Mlp2& head, int x) {
  if (t.val(x).rank() != 2 || t.val(x).cols() != head.d_in)
    throw std::invalid_argument("project: input is " + t.val(x).shape_str() + ", head expects [B," +
                                std::to_string(head.d_in) + "]");
  int h = ops::relu(t, ops::add_row_bias(t, ops::matmul(t, x, bind.leaf(t, head.w1)),
                                         bind.leaf(t, head.b1)));
  int y = ops::add_row_bias(t, ops::matmul(t, h, bind.leaf(t, head.w2)), bind.leaf(t, head.b2));
  return ops::l2_normalize_rows(t, y);
}

HeadBank make_head_bank(ParamStore& store, const BankConfig& cfg, Stream& init) {
  if (cfg.m < 1) throw std::invalid_argument("head bank: m must be >= 1");
  if (static_cast<int>(cfg.proj.d_cross.size()) != cfg.m)
    throw std::invalid_argument("head bank: d_cross has " +
                                std::to_string(cfg.proj.d_cross.size()) + " levels, expected " +
                                std::to_string(cfg.m));
  if (cfg.multi_mlp) validate_config(cfg.proj);

  HeadBank bank;
  bank.cfg = cfg;
  if (cfg.decoupled_intra) {
    bank.intra_point = make_mlp2(store, "heads/intra_point", cfg.proj.d_in, cfg.proj.d_intra, init);
    bank.intra_image = make_mlp2(store, "heads/intra_image", cfg.proj.d_in, cfg.proj.d_intra, init);
  }
  int levels = cfg.multi_mlp ? cfg.m : 1;
  for (int j = 0; j < levels; ++j) {
    int d_out = cfg.proj.d_cross[static_cast<size_t>(j)];
    std::string suffix = "/level" + std::to_string(j + 1);
    bank.cross_point.push_back(
        make_mlp2(store, "heads/cross_point" + suffix, cfg.proj.d_in, d_out, init));
    bank.cross_image.push_back(
        make_mlp2(store, "heads/cross_image" + suffix, cfg.proj.d_in, d_out, init));
  }
  return bank;
}

static const Mlp2& cross_head(const std::vector<Mlp2>& heads, const BankConfig& cfg, int level) {
  if (level < 1 || level > cfg.m)
    throw std::invalid_argument("head bank: level " + std::to_string(level) + " out of range 1.." +
                                std::to_string(cfg.m));
  return heads[static_cast<size_t>(cfg.multi_mlp ? level - 1 : 0)];
}

int HeadBank::project_intra_point(Tape& t, TapeBinding& b, int x) const {
  if (cfg.decoupled_intra) return project(t, b, intra_point, x);
  return project(t, b, cross_head(cross_point, cfg, 1), x);
}

int HeadBank::project_intra_image(Tape& t, TapeBinding& b, int x) const {
  if (cfg.decoupled_intra) return project(t, b, intra_image, x);
  return project(t, b, cross_head(cross_image, cfg, 1), x);
}

int HeadBank::project_cross_point(Tape& t, TapeBinding& b, int x, int level) const {
  return project(t, b, cross_head(cross_point, cfg, level), x);
}

int HeadBank::project_cross_image(Tape& t, TapeBinding& b, int x, int level) const {
  return project(t, b, cross_head(cross_image, cfg, level), x);
}

int HeadBank::intra_dim() const {
  return cfg.decoupled_intra ? cfg.proj.d_intra : cfg.proj.d_cross[0];
}

int HeadBank::cross_dim(int level) const {
  if (level < 1 || level > cfg.m)
    throw std::invalid_argument("head bank: level out of range");
  return cfg.proj.d_cross[static_cast<size_t>(cfg.multi_mlp ? level - 1 : 0)];
}

std::vector<int> HeadBank::level_param_ids(int level) const {
  const Mlp2& p = cross_head(cross_point, cfg, level);
  const Mlp2& i = cross_head(cross_image, cfg, level);
  return {p.w1, p.b1, p.w2, p.b2, i.w1, i.b1, i.w2, i.b2};
}

std::vector<int> HeadBank::all_param_ids() const {
  std::vector<int> ids;
  auto push_head = [&ids](const Mlp2& h) {
    if (h.w1 >= 0) {
      ids.push_back(h.w1);
      ids.push_back(h.b1);
      ids.push_back(h.w2);
      ids.push_back(h.b2);
    }
  };
  push_head(intra_point);
  push_head(intra_image);
  for (const auto& h : cross_point) push_head(h);
  for (const auto& h : cross_image) push_head(h);
  return ids;
}

}  // namespace mmpoint::heads
