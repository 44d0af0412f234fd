#pragma once

#include <string_view>
#include <vector>

#include "glada/common.hpp"

namespace glada {

enum class Provenance { given, init_threshold, agreed, abandoned, unlabeled };

std::string_view to_string(Provenance p);

struct LabelEntry {
  int label = -1;
  Provenance provenance = Provenance::unlabeled;
  int iteration = -1;  // agree-mechanism iteration that injected the label
  int y_sbc = -1;      // predictor outputs recorded at injection time
  int y_dnn = -1;

  bool labeled() const {
    return provenance == Provenance::given || provenance == Provenance::init_threshold ||
           provenance == Provenance::agreed;
  }

  bool operator==(const LabelEntry&) const = default;
};

// Labeled / unlabeled / abandoned partition of the target training samples.
//
// Invariants: label >= 0 exactly when provenance is given, init_threshold or
// agreed; `given` entries never change once set.
class PseudoLabelState {
 public:
  PseudoLabelState() = default;
  explicit PseudoLabelState(std::size_t count) : entries_(count) {}

  std::size_t size() const { return entries_.size(); }
  const LabelEntry& operator[](std::size_t i) const { return entries_.at(i); }
  const std::vector<LabelEntry>& entries() const { return entries_; }

  void set_given(std::size_t i, int label);
  void set_threshold(std::size_t i, int label);
  void set_agreed(std::size_t i, int label, int iteration, int y_sbc, int y_dnn);
  // Every still-unlabeled entry becomes abandoned.
  void abandon_unlabeled();

  std::size_t labeled_count() const;
  std::size_t unlabeled_count() const;
  std::size_t abandoned_count() const;
  std::size_t count(Provenance p) const;

  std::vector<std::size_t> labeled_indices() const;
  std::vector<std::size_t> unlabeled_indices() const;
  // label per sample, -1 where not labeled
  std::vector<int> labels() const;

  // Throws ArgumentError if an entry breaks the label/provenance invariant.
  void validate(int num_classes) const;

  bool operator==(const PseudoLabelState&) const = default;

 private:
  LabelEntry& mutable_entry(std::size_t i, int label);

  std::vector<LabelEntry> entries_;
};

}  // namespace glada
