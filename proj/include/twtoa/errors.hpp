#pragma once

#include <stdexcept>
#include <string>

namespace twtoa
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Anchor and (displaced) UD position closer than kCoincidenceThreshold.
class CoincidentGeometry : public Error
{
public:
  using Error::Error;
};

class NonPositiveSigma : public Error
{
public:
  using Error::Error;
};

class DimensionMismatch : public Error
{
public:
  using Error::Error;
};

/// Fisher information too ill-conditioned to invert (too few anchors, collinear layout, ...).
class UnobservableGeometry : public Error
{
public:
  using Error::Error;
};

class InvalidScenario : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  using Error::Error;
};

}  // namespace twtoa
