#pragma once

#include <stdexcept>

namespace occtrack
{
/// A file that cannot be opened, read, or written.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

}  // namespace occtrack
