#pragma once

#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>

#include "sman/tensor.hpp"

namespace sman {

// Named parameters with gradient accumulators, iterated in insertion order.
// Entries live in a deque so references stay valid while new entries are added.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    // Row 0 is a PAD row: held at zero, never updated or decayed.
    bool pad_row = false;
  };

  Entry& add(std::string name, Tensor<T> value, bool pad_row = false) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    Tensor<T> grad(value.shape());
    entries_.push_back(Entry{std::move(name), std::move(value), std::move(grad), pad_row});
    return entries_.back();
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  Entry& at(std::string_view name) { return entries_.at(lookup(name)); }
  const Entry& at(std::string_view name) const { return entries_.at(lookup(name)); }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(T(0));
  }

 private:
  std::size_t lookup(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw IndexError("unknown parameter: " + std::string(name));
    return it->second;
  }

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace sman
