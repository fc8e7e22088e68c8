#pragma once

#include <string>

namespace nrlearn {

// lowercase hex SHA-1 digest
std::string sha1_hex(const std::string& data);

// git blob convention: sha1("blob <size>\0" + content)
std::string git_blob_sha1(const std::string& content);

} // namespace nrlearn
