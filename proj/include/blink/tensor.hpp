#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace blink {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
void require(bool cond, const std::string& msg);

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  bool leaf = true;  // false for op results
  std::string name;
};

// Shared-handle dense tensor. Copying a Tensor aliases the same storage;
// clone() makes a deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false, std::string name = {});

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value);
  static Tensor from(Shape shape, std::vector<T> values);
  static Tensor scalar(T value) { return from({1}, {value}); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  T* data() { return impl_->data.data(); }
  const T* data() const { return impl_->data.data(); }
  std::vector<T>& vec() { return impl_->data; }
  const std::vector<T>& vec() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool is_leaf() const { return impl_->leaf; }
  void mark_result() { impl_->leaf = false; }

  // Lazily allocates a zero gradient buffer. Const like any handle access:
  // the buffer lives on the shared impl.
  T* grad() const;
  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<T>& grad_vec() const { return impl_->grad; }
  void zero_grad();

  const std::string& name() const { return impl_->name; }
  void set_name(std::string n) { impl_->name = std::move(n); }

  T item() const;
  Tensor clone() const;

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Ordered record of executed operations. Replaying adjoints visits records
// in exact reverse execution order. The tape is cleared only by reset();
// calling backward() repeatedly accumulates gradients on leaf tensors.
template <typename T>
class Tape {
 public:
  struct Record {
    std::shared_ptr<TensorImpl<T>> out;
    std::function<void()> backward;
  };

  void record(std::shared_ptr<TensorImpl<T>> out, std::function<void()> fn) {
    recs_.push_back(Record{std::move(out), std::move(fn)});
  }

  void backward(const Tensor<T>& loss);
  void reset() { recs_.clear(); }
  size_t size() const { return recs_.size(); }

  static Tape<T>* current();

 private:
  std::vector<Record> recs_;
};

// Installs a tape as the thread's recording target for its lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

// Checked mode: when on, every op output is scanned for NaN/Inf and the
// first offending tensor is named in the thrown error.
void set_finite_checks(bool on);
bool finite_checks();

template <typename T>
void check_finite(const Tensor<T>& t, const char* what);

}  // namespace blink
