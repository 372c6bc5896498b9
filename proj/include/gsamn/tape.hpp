#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gsamn/tensor.hpp"

namespace gsamn {

// Reverse-mode tape. Operations register tensors as nodes and push a backward
// rule; backward() replays the rules in reverse recording order, which is a
// valid reverse-topological order because inputs are always recorded before
// the operation that consumes them. Each rule runs exactly once.
class Tape {
 public:
  struct Record {
    std::vector<int> inputs;
    int output;
    std::function<void()> apply;  // accumulates into input grads
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  ~Tape() {
    for (auto& n : nodes_) {
      n->tape = nullptr;
      n->node_id = -1;
    }
  }

  int ensure_node(const Tensor& t) {
    TensorData* d = &t.data();
    if (owns(d)) return d->node_id;
    d->tape = this;
    d->node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(t.shared());
    return d->node_id;
  }

  bool on_tape(const Tensor& t) const { return owns(&t.data()); }

  void record(std::vector<int> inputs, int output, std::function<void()> apply) {
    records_.push_back(Record{std::move(inputs), output, std::move(apply)});
  }

  void backward(const Tensor& loss) {
    if (backward_done_)
      throw ContractError("backward already ran on this tape; reset() before reusing it");
    if (loss.numel() != 1)
      throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    if (!on_tape(loss))
      throw MissingNodeError("loss tensor is not recorded on this tape");
    for (auto& n : nodes_) n->grad.assign(n->values.size(), 0.0);
    loss.data().grad[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->apply();
    backward_done_ = true;
  }

  void reset() {
    for (auto& n : nodes_) {
      n->tape = nullptr;
      n->node_id = -1;
    }
    nodes_.clear();
    records_.clear();
    backward_done_ = false;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  const std::vector<Record>& records() const { return records_; }
  bool backward_done() const { return backward_done_; }

 private:
  bool owns(const TensorData* d) const {
    return d->tape == this && d->node_id >= 0 &&
           static_cast<std::size_t>(d->node_id) < nodes_.size() &&
           nodes_[static_cast<std::size_t>(d->node_id)].get() == d;
  }

  std::vector<Record> records_;
  std::vector<std::shared_ptr<TensorData>> nodes_;
  bool backward_done_ = false;
};

}  // namespace gsamn
