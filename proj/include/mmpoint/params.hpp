#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mmpoint/tape.hpp"
#include "mmpoint/tensor.hpp"

namespace mmpoint {

// Named parameter registry with AdamW moment buffers. Values are kept
// float32-representable at all times (init and every update round through
// float), which makes the float32 checkpoint encoding lossless and resumed
// runs bit-identical to uninterrupted ones.
struct ParamStore {
  struct Entry {
    std::string name;
    Tensor value;
    Tensor m;
    Tensor v;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> index;

  static double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

  int add(const std::string& name, Tensor init) {
    if (index.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    for (auto& v : init.data) v = to_f32(v);
    Entry e{name, std::move(init), Tensor{}, Tensor{}};
    e.m = Tensor::zeros(e.value.shape);
    e.v = Tensor::zeros(e.value.shape);
    entries.push_back(std::move(e));
    int id = static_cast<int>(entries.size()) - 1;
    index.emplace(entries.back().name, id);
    return id;
  }

  Entry& at(int id) { return entries[static_cast<size_t>(id)]; }
  const Entry& at(int id) const { return entries[static_cast<size_t>(id)]; }

  int find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }

  std::uint64_t value_hash() const;
};

// Per-tape parameter leaves. Bind lazily so a graph only pays for the
// parameters it actually touches; unbound or unused entries simply receive
// no gradient.
class TapeBinding {
 public:
  explicit TapeBinding(ParamStore& store, bool needs_grad = true)
      : store_(&store), needs_grad_(needs_grad), leaf_(store.entries.size(), -1) {}

  int leaf(Tape& t, int entry_id) {
    int& id = leaf_[static_cast<size_t>(entry_id)];
    if (id < 0) id = t.leaf(store_->at(entry_id).value, needs_grad_);
    return id;
  }

  // Gradient of the bound entry after backward(); zero tensor if never used.
  Tensor grad_of(Tape& t, int entry_id) const {
    int id = leaf_[static_cast<size_t>(entry_id)];
    if (id < 0 || t.grad(id).size() == 0)
      return Tensor::zeros(store_->at(entry_id).value.shape);
    return t.grad(id);
  }

  bool bound(int entry_id) const { return leaf_[static_cast<size_t>(entry_id)] >= 0; }

 private:
  ParamStore* store_;
  bool needs_grad_;
  std::vector<int> leaf_;
};

}  // namespace mmpoint
