#include "glada/label_state.hpp"

#include <string>

namespace glada {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::given: return "given";
    case Provenance::init_threshold: return "init-threshold";
    case Provenance::agreed: return "agreed";
    case Provenance::abandoned: return "abandoned";
    case Provenance::unlabeled: return "unlabeled";
  }
  return "unknown";
}

LabelEntry& PseudoLabelState::mutable_entry(std::size_t i, int label) {
  if (i >= entries_.size()) throw ArgumentError("label index " + std::to_string(i) + " out of range");
  if (label < 0) throw ArgumentError("pseudo label must be non-negative");
  LabelEntry& e = entries_[i];
  if (e.provenance == Provenance::given)
    throw ArgumentError("sample " + std::to_string(i) + " carries a given label and is immutable");
  return e;
}

void PseudoLabelState::set_given(std::size_t i, int label) {
  LabelEntry& e = mutable_entry(i, label);
  e = LabelEntry{label, Provenance::given};
}

void PseudoLabelState::set_threshold(std::size_t i, int label) {
  LabelEntry& e = mutable_entry(i, label);
  e = LabelEntry{label, Provenance::init_threshold};
}

void PseudoLabelState::set_agreed(std::size_t i, int label, int iteration, int y_sbc, int y_dnn) {
  LabelEntry& e = mutable_entry(i, label);
  if (e.labeled()) throw ArgumentError("sample " + std::to_string(i) + " is already labeled");
  e = LabelEntry{label, Provenance::agreed, iteration, y_sbc, y_dnn};
}

void PseudoLabelState::abandon_unlabeled() {
  for (auto& e : entries_)
    if (e.provenance == Provenance::unlabeled) e.provenance = Provenance::abandoned;
}

std::size_t PseudoLabelState::count(Provenance p) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.provenance == p ? 1 : 0;
  return n;
}

std::size_t PseudoLabelState::labeled_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.labeled() ? 1 : 0;
  return n;
}

std::size_t PseudoLabelState::unlabeled_count() const { return count(Provenance::unlabeled); }
std::size_t PseudoLabelState::abandoned_count() const { return count(Provenance::abandoned); }

std::vector<std::size_t> PseudoLabelState::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].labeled()) out.push_back(i);
  return out;
}

std::vector<std::size_t> PseudoLabelState::unlabeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].provenance == Provenance::unlabeled) out.push_back(i);
  return out;
}

std::vector<int> PseudoLabelState::labels() const {
  std::vector<int> out(entries_.size(), -1);
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].labeled()) out[i] = entries_[i].label;
  return out;
}

void PseudoLabelState::validate(int num_classes) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const bool has_label = e.label >= 0;
    if (has_label != e.labeled())
      throw ArgumentError("label/provenance mismatch at sample " + std::to_string(i));
    if (has_label && e.label >= num_classes)
      throw ArgumentError("label out of range at sample " + std::to_string(i));
  }
}

}  // namespace glada
