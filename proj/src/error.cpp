#include "bvcqr/error.hpp"

namespace bvcqr {

void throw_usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }
void throw_data(const std::string& what) { throw Error(ErrorKind::Data, what); }
void throw_numerical(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

}  // namespace bvcqr
