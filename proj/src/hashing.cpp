#include "stepsearch/hashing.hpp"

#include <cstdio>

#include <boost/uuid/name_generator_sha1.hpp>
#include <boost/uuid/uuid_io.hpp>

namespace stepsearch {

std::uint64_t hash_combine(std::uint64_t hash, std::uint64_t value) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  return fnv1a(std::string_view(bytes, 8), hash);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string name_uuid(std::string_view name) {
  // Fixed namespace for all trees produced by this tool.
  static const boost::uuids::uuid kNamespace = boost::uuids::name_generator_sha1(
      boost::uuids::ns::url())("stepsearch:tree");
  boost::uuids::name_generator_sha1 gen(kNamespace);
  return boost::uuids::to_string(gen(name.data(), name.size()));
}

}  // namespace stepsearch
