#include "blink/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace blink {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad, std::string name) {
  for (int e : shape)
    require(e > 0, "tensor extent must be positive, got shape " + shape_str(shape));
  impl_ = std::make_shared<TensorImpl<T>>();
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(shape_numel(impl_->shape)), T(0));
  impl_->requires_grad = requires_grad;
  impl_->name = std::move(name);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor t(std::move(shape));
  for (auto& v : t.impl_->data) v = value;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values) {
  Tensor t(std::move(shape));
  require(static_cast<int64_t>(values.size()) == t.numel(),
          "value count does not match shape " + shape_str(t.shape()));
  t.impl_->data = std::move(values);
  return t;
}

template <typename T>
T* Tensor<T>::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad.data();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, "item() requires a scalar tensor, got " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t(impl_->shape, impl_->requires_grad, impl_->name);
  t.impl_->data = impl_->data;
  return t;
}

namespace {
template <typename T>
Tape<T>*& current_tape_slot() {
  static thread_local Tape<T>* slot = nullptr;
  return slot;
}
std::atomic<bool> g_finite_checks{false};
}  // namespace

template <typename T>
Tape<T>* Tape<T>::current() {
  return current_tape_slot<T>();
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  require(loss.defined() && loss.numel() == 1,
          "backward() requires a scalar loss, got " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) {
    std::fprintf(stderr,
                 "blink: backward() on a detached tensor; gradients stay zero\n");
    return;
  }
  // Fresh adjoints for intermediate results; leaf gradients accumulate
  // across repeated backward() calls.
  for (auto& r : recs_) {
    if (r.out && !r.out->leaf && !r.out->grad.empty())
      std::fill(r.out->grad.begin(), r.out->grad.end(), T(0));
  }
  Tensor<T> l = loss;
  l.grad()[0] += T(1);
  for (auto it = recs_.rbegin(); it != recs_.rend(); ++it) it->backward();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) {
  prev_ = current_tape_slot<T>();
  current_tape_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  current_tape_slot<T>() = prev_;
}

void set_finite_checks(bool on) { g_finite_checks.store(on); }
bool finite_checks() { return g_finite_checks.load(); }

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  const T* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) {
      std::ostringstream os;
      os << "non-finite value in " << what;
      if (!t.name().empty()) os << " (tensor '" << t.name() << "')";
      os << " at flat index " << i << " of shape " << shape_str(t.shape());
      throw NonFiniteError(os.str());
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template void check_finite<float>(const Tensor<float>&, const char*);
template void check_finite<double>(const Tensor<double>&, const char*);

}  // namespace blink
