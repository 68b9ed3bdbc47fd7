import math
import string


def letter2party(letters: str) -> int:
    """Returns the party index (starting from 0) corresponding to its letters.

    Example: party "A" gives 0, "B" gives 1, "AA" gives 26

    Args:
    - letters (str): Letters of the party (e.g. C)

    Raises:
    - ValueError: Letters could not be parsed

    Returns:
    - int: Index of the party (starting from 0)
    """
    if not letters or any(c not in string.ascii_uppercase for c in letters):
        raise ValueError("Could not parse party {}".format(letters))
    num = 0
    for c in letters:
        num = num * 26 + (ord(c) - ord("A")) + 1
    return num - 1


def party2letter(party: int) -> str:
    """Returns the letters naming a party.

    Example: 0 gives "A", 2 gives "C"

    Args:
    - party (int): Party index (starting from 0)

    Returns:
    - str: Party letters
    """
    if party < 0:
        raise ValueError("Invalid party index {}".format(party))
    n = party + 1
    letters = ""
    while n > 0:
        n, remainder = divmod(n - 1, 26)
        letters = chr(65 + remainder) + letters
    return letters


def dump_bound(value: float) -> str:
    """Serializes a bound the way the command line prints it (9 significant digits, trailing zeros kept).

    Args:
    - value (float): Value to serialize

    Returns:
    - str: String, "inf", "-inf" or "nan" if not finite
    """
    if not math.isfinite(value):
        return str(value)
    return "{:#.9g}".format(value)


def dump_real(value: float) -> str:
    """Serializes a float so that it reads back bit-exact.

    Args:
    - value (float): Value to serialize

    Returns:
    - str: String with 17 significant digits at most
    """
    if value == 0:
        return "0"
    return "{:.17g}".format(value)


def str2real(text: str) -> float:
    """Parses a real number.

    Args:
    - text (str): String to parse

    Raises:
    - ValueError: Not a finite number

    Returns:
    - float: Value
    """
    try:
        value = float(text)
    except ValueError:
        raise ValueError("Could not parse number {}".format(text))
    if not math.isfinite(value):
        raise ValueError("Number {} is not finite".format(text))
    return value


def str2index(text: str) -> int:
    """Parses a non-negative integer index.

    Args:
    - text (str): String to parse

    Raises:
    - ValueError: Not a non-negative integer

    Returns:
    - int: Value
    """
    if not text.isdigit():
        raise ValueError("Could not parse index {}".format(text))
    return int(text)
