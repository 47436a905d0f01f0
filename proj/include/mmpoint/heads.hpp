#pragma once

#include <string>
#include <vector>

#include "mmpoint/params.hpp"
#include "mmpoint/rng.hpp"
#include "mmpoint/tape.hpp"

namespace mmpoint::heads {

// Projection-space dimensions. Cross-modal spaces must be strictly wider
// than the intra-modal space and non-decreasing across levels.
struct ProjectionConfig {
  int d_in = 256;
  int d_intra = 256;
  std::vector<int> d_cross;
};

ProjectionConfig default_projection(int m, int d_in = 256, int d_intra = 256);
void validate_config(const ProjectionConfig& cfg);

// Two-layer projection head; hidden width equals the input width.
struct Mlp2 {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  int d_in = 0, d_out = 0;
};

Mlp2 make_mlp2(ParamStore& store, const std::string& prefix, int d_in, int d_out, Stream& init);

// x [B, d_in] -> unit-norm rows [B, d_out]
int project(Tape& t, TapeBinding& bind, const Mlp2& head, int x);

struct BankConfig {
  int m = 4;
  ProjectionConfig proj;
  bool multi_mlp = true;        // per-level cross heads vs one shared cross head
  bool decoupled_intra = true;  // separate intra space vs routing through the cross head
};

// All projection heads of one run. Parameters for distinct levels are
// distinct registry entries, so levels are isolated by construction: a loss
// touching only level j propagates exactly zero gradient elsewhere.
struct HeadBank {
  BankConfig cfg;
  Mlp2 intra_point, intra_image;       // intra_image exists but default objective skips it
  std::vector<Mlp2> cross_point, cross_image;

  int project_intra_point(Tape& t, TapeBinding& b, int x) const;
  int project_intra_image(Tape& t, TapeBinding& b, int x) const;
  int project_cross_point(Tape& t, TapeBinding& b, int x, int level) const;  // level is 1-based
  int project_cross_image(Tape& t, TapeBinding& b, int x, int level) const;

  int intra_dim() const;
  int cross_dim(int level) const;
  std::vector<int> level_param_ids(int level) const;
  std::vector<int> all_param_ids() const;
};

HeadBank make_head_bank(ParamStore& store, const BankConfig& cfg, Stream& init);

}  // namespace mmpoint::heads
