//! Algorithm templates for the synthetic benchmark.
//!
//! One statement or brace per line. `$name` marks a renamable identifier,
//! `#k` the k-th literal parameter. `@for init; cond; step` opens a counted
//! loop closed by `@end`, rendered either as `for` or as `while`. Consecutive
//! `@swap` lines are mutually independent and may be reordered.

pub struct Template {
    pub name: &'static str,
    /// Inclusive ranges of the literal parameters.
    pub literals: &'static [(i64, i64)],
    pub main: &'static str,
    /// A different implementation of the same function.
    pub alt: &'static str,
}

pub const TEMPLATES: &[Template] = &[
    Template {
        name: "gcd",
        literals: &[],
        main: "int $gcd(int $a, int $b) {
@for ; $b != 0;
int $t = $a % $b;
$a = $b;
$b = $t;
@end
return $a;
}",
        alt: "int $gcd(int $a, int $b) {
if ($b == 0) {
return $a;
}
return $gcd($b, $a % $b);
}",
    },
    Template {
        name: "factorial",
        literals: &[],
        main: "long $fact(int $n) {
long $res = 1;
@for int $i = 2; $i <= $n; $i++
$res *= $i;
@end
return $res;
}",
        alt: "long $fact(int $n) {
if ($n <= 1) {
return 1;
}
return $n * $fact($n - 1);
}",
    },
    Template {
        name: "fibonacci",
        literals: &[],
        main: "int $fib(int $n) {
@swap int $prev = 0;
@swap int $cur = 1;
@for int $i = 0; $i < $n; $i++
int $next = $prev + $cur;
$prev = $cur;
$cur = $next;
@end
return $prev;
}",
        alt: "int $fib(int $n) {
if ($n < 2) {
return $n;
}
return $fib($n - 1) + $fib($n - 2);
}",
    },
    Template {
        name: "array_sum",
        literals: &[],
        main: "int $sumAll(int[] $arr) {
int $total = 0;
@for int $i = 0; $i < $arr.length; $i++
$total += $arr[$i];
@end
return $total;
}",
        alt: "int $sumAll(int[] $arr) {
int $total = 0;
for (int $v : $arr) {
$total = $total + $v;
}
return $total;
}",
    },
    Template {
        name: "array_max",
        literals: &[],
        main: "int $maxOf(int[] $arr) {
int $best = $arr[0];
@for int $i = 1; $i < $arr.length; $i++
if ($arr[$i] > $best) {
$best = $arr[$i];
}
@end
return $best;
}",
        alt: "int $maxOf(int[] $arr) {
int $best = Integer.MIN_VALUE;
for (int $v : $arr) {
$best = Math.max($best, $v);
}
return $best;
}",
    },
    Template {
        name: "linear_search",
        literals: &[],
        main: "int $indexOf(int[] $arr, int $key) {
@for int $i = 0; $i < $arr.length; $i++
if ($arr[$i] == $key) {
return $i;
}
@end
return -1;
}",
        alt: "int $indexOf(int[] $arr, int $key) {
int $pos = -1;
int $k = $arr.length - 1;
while ($k >= 0) {
if ($arr[$k] == $key) {
$pos = $k;
}
$k--;
}
return $pos;
}",
    },
    Template {
        name: "binary_search",
        literals: &[],
        main: "int $search(int[] $arr, int $key) {
@swap int $lo = 0;
@swap int $hi = $arr.length - 1;
@for ; $lo <= $hi;
int $mid = ($lo + $hi) / 2;
if ($arr[$mid] == $key) {
return $mid;
} else if ($arr[$mid] < $key) {
$lo = $mid + 1;
} else {
$hi = $mid - 1;
}
@end
return -1;
}",
        alt: "int $search(int[] $arr, int $key, int $lo, int $hi) {
if ($lo > $hi) {
return -1;
}
int $mid = $lo + ($hi - $lo) / 2;
if ($arr[$mid] > $key) {
return $search($arr, $key, $lo, $mid - 1);
}
if ($arr[$mid] < $key) {
return $search($arr, $key, $mid + 1, $hi);
}
return $mid;
}",
    },
    Template {
        name: "sort",
        literals: &[],
        main: "void $sort(int[] $arr) {
@for int $i = 0; $i < $arr.length - 1; $i++
@for int $j = 0; $j < $arr.length - 1 - $i; $j++
if ($arr[$j] > $arr[$j + 1]) {
int $tmp = $arr[$j];
$arr[$j] = $arr[$j + 1];
$arr[$j + 1] = $tmp;
}
@end
@end
}",
        alt: "void $sort(int[] $arr) {
@for int $i = 1; $i < $arr.length; $i++
int $key = $arr[$i];
int $j = $i - 1;
while ($j >= 0 && $arr[$j] > $key) {
$arr[$j + 1] = $arr[$j];
$j--;
}
$arr[$j + 1] = $key;
@end
}",
    },
    Template {
        name: "reverse_array",
        literals: &[],
        main: "void $reverse(int[] $arr) {
@for int $i = 0; $i < $arr.length / 2; $i++
int $tmp = $arr[$i];
$arr[$i] = $arr[$arr.length - 1 - $i];
$arr[$arr.length - 1 - $i] = $tmp;
@end
}",
        alt: "void $reverse(int[] $arr) {
@swap int $left = 0;
@swap int $right = $arr.length - 1;
while ($left < $right) {
int $t = $arr[$left];
$arr[$left++] = $arr[$right];
$arr[$right--] = $t;
}
}",
    },
    Template {
        name: "palindrome",
        literals: &[],
        main: "boolean $isPal(String $s) {
@for int $i = 0; $i < $s.length() / 2; $i++
if ($s.charAt($i) != $s.charAt($s.length() - 1 - $i)) {
return false;
}
@end
return true;
}",
        alt: "boolean $isPal(String $s) {
String $rev = new StringBuilder($s).reverse().toString();
return $rev.equals($s);
}",
    },
    Template {
        name: "count_vowels",
        literals: &[],
        main: "int $countVowels(String $s) {
int $count = 0;
@for int $i = 0; $i < $s.length(); $i++
char $c = Character.toLowerCase($s.charAt($i));
if ($c == 'a' || $c == 'e' || $c == 'i' || $c == 'o' || $c == 'u') {
$count++;
}
@end
return $count;
}",
        alt: "int $countVowels(String $s) {
int $count = 0;
for (char $c : $s.toLowerCase().toCharArray()) {
if (\"aeiou\".indexOf($c) >= 0) {
$count += 1;
}
}
return $count;
}",
    },
    Template {
        name: "is_prime",
        literals: &[],
        main: "boolean $isPrime(int $n) {
if ($n < 2) {
return false;
}
@for int $d = 2; $d * $d <= $n; $d++
if ($n % $d == 0) {
return false;
}
@end
return true;
}",
        alt: "boolean $isPrime(int $n) {
int $divisors = 0;
@for int $d = 1; $d <= $n; $d++
if ($n % $d == 0) {
$divisors++;
}
@end
return $divisors == 2;
}",
    },
    Template {
        name: "power",
        literals: &[],
        main: "long $power(long $base, int $exp) {
long $result = 1;
@for int $i = 0; $i < $exp; $i++
$result *= $base;
@end
return $result;
}",
        alt: "long $power(long $base, int $exp) {
if ($exp == 0) {
return 1;
}
long $half = $power($base, $exp / 2);
if ($exp % 2 == 0) {
return $half * $half;
}
return $half * $half * $base;
}",
    },
    Template {
        name: "digit_sum",
        literals: &[(2, 10)],
        main: "int $digitSum(int $n) {
int $sum = 0;
@for ; $n > 0; $n /= #0
$sum += $n % #0;
@end
return $sum;
}",
        alt: "int $digitSum(int $n) {
if ($n == 0) {
return 0;
}
return $n % #0 + $digitSum($n / #0);
}",
    },
    Template {
        name: "count_char",
        literals: &[],
        main: "int $countChar(String $text, char $ch) {
int $n = 0;
@for int $i = 0; $i < $text.length(); $i++
if ($text.charAt($i) == $ch) {
$n++;
}
@end
return $n;
}",
        alt: "int $countChar(String $text, char $ch) {
String $rest = $text.replace(String.valueOf($ch), \"\");
return $text.length() - $rest.length();
}",
    },
    Template {
        name: "average",
        literals: &[],
        main: "double $average(double[] $vals) {
double $sum = 0;
@for int $i = 0; $i < $vals.length; $i++
$sum += $vals[$i];
@end
return $sum / $vals.length;
}",
        alt: "double $average(double[] $vals) {
@swap double $mean = 0;
@swap int $k = 0;
for (double $x : $vals) {
$k++;
$mean += ($x - $mean) / $k;
}
return $mean;
}",
    },
    Template {
        name: "sum_multiples",
        literals: &[(2, 5), (6, 11)],
        main: "int $sumMultiples(int $limit) {
int $total = 0;
@for int $i = 1; $i < $limit; $i++
if ($i % #0 == 0 || $i % #1 == 0) {
$total += $i;
}
@end
return $total;
}",
        alt: "int $sumMultiples(int $limit) {
@swap int $p = ($limit - 1) / #0;
@swap int $q = ($limit - 1) / #1;
@swap int $r = ($limit - 1) / (#0 * #1);
int $both = #0 * #1 * $r * ($r + 1) / 2;
return #0 * $p * ($p + 1) / 2 + #1 * $q * ($q + 1) / 2 - $both;
}",
    },
    Template {
        name: "reverse_string",
        literals: &[],
        main: "String $reverseStr(String $s) {
String $out = \"\";
@for int $i = $s.length() - 1; $i >= 0; $i--
$out += $s.charAt($i);
@end
return $out;
}",
        alt: "String $reverseStr(String $s) {
if ($s.isEmpty()) {
return $s;
}
return $reverseStr($s.substring(1)) + $s.charAt(0);
}",
    },
    Template {
        name: "count_words",
        literals: &[],
        main: "int $countWords(String $line) {
@swap int $words = 0;
@swap boolean $inWord = false;
@for int $i = 0; $i < $line.length(); $i++
if (Character.isWhitespace($line.charAt($i))) {
$inWord = false;
} else if (!$inWord) {
$inWord = true;
$words++;
}
@end
return $words;
}",
        alt: "int $countWords(String $line) {
String $trimmed = $line.trim();
if ($trimmed.isEmpty()) {
return 0;
}
return $trimmed.split(\" +\").length;
}",
    },
    Template {
        name: "dot_product",
        literals: &[],
        main: "int $dot(int[] $xs, int[] $ys) {
int $acc = 0;
@for int $i = 0; $i < $xs.length; $i++
$acc += $xs[$i] * $ys[$i];
@end
return $acc;
}",
        alt: "int $dot(int[] $xs, int[] $ys) {
@swap int $acc = 0;
@swap int $i = $xs.length;
while ($i-- > 0) {
int $prod = $xs[$i] * $ys[$i];
$acc = $acc + $prod;
}
return $acc;
}",
    },
    Template {
        name: "count_above",
        literals: &[(1, 50)],
        main: "int $countAbove(int[] $arr, int $limit) {
int $count = 0;
@for int $i = 0; $i < $arr.length; $i++
if ($arr[$i] > $limit + #0) {
$count++;
}
@end
return $count;
}",
        alt: "int $countAbove(int[] $arr, int $limit) {
int $count = 0;
for (int $v : $arr) {
$count += $v - #0 > $limit ? 1 : 0;
}
return $count;
}",
    },
    Template {
        name: "collatz",
        literals: &[],
        main: "int $collatz(long $n) {
int $steps = 0;
@for ; $n != 1; $steps++
if ($n % 2 == 0) {
$n = $n / 2;
} else {
$n = 3 * $n + 1;
}
@end
return $steps;
}",
        alt: "int $collatz(long $n) {
if ($n == 1) {
return 0;
}
long $next = ($n & 1) == 0 ? $n >> 1 : $n * 3 + 1;
return 1 + $collatz($next);
}",
    },
    Template {
        name: "scaled_series",
        literals: &[(2, 9)],
        main: "long $series(int $n) {
long $s = 0;
@for int $k = 1; $k <= $n; $k++
$s += (long) $k * #0;
@end
return $s;
}",
        alt: "long $series(int $n) {
if ($n <= 0) {
return 0;
}
long $tri = (long) $n * ($n + 1) / 2;
return $tri * #0;
}",
    },
    Template {
        name: "arg_min",
        literals: &[],
        main: "int $argMin(int[] $arr) {
int $best = 0;
@for int $i = 1; $i < $arr.length; $i++
if ($arr[$i] < $arr[$best]) {
$best = $i;
}
@end
return $best;
}",
        alt: "int $argMin(int[] $arr) {
@swap int $idx = -1;
@swap int $low = Integer.MAX_VALUE;
@swap int $pos = 0;
for (int $v : $arr) {
if ($v < $low) {
$low = $v;
$idx = $pos;
}
$pos++;
}
return $idx;
}",
    },
    Template {
        name: "has_duplicate",
        literals: &[],
        main: "boolean $hasDup(int[] $arr) {
@for int $i = 0; $i < $arr.length; $i++
@for int $j = $i + 1; $j < $arr.length; $j++
if ($arr[$i] == $arr[$j]) {
return true;
}
@end
@end
return false;
}",
        alt: "boolean $hasDup(int[] $arr) {
java.util.Set<Integer> $seen = new java.util.HashSet<>();
for (int $v : $arr) {
if (!$seen.add($v)) {
return true;
}
}
return false;
}",
    },
    Template {
        name: "bit_count",
        literals: &[],
        main: "int $bitCount(int $n) {
int $bits = 0;
@for ; $n != 0; $n >>>= 1
$bits += $n & 1;
@end
return $bits;
}",
        alt: "int $bitCount(int $n) {
int $bits = 0;
while ($n != 0) {
$n &= $n - 1;
$bits++;
}
return $bits;
}",
    },
    Template {
        name: "affine_scale",
        literals: &[(1, 40)],
        main: "void $scale(double[] $vals, double $factor) {
@for int $i = 0; $i < $vals.length; $i++
$vals[$i] = $vals[$i] * $factor + #0;
@end
}",
        alt: "void $scale(double[] $vals, double $factor) {
int $n = $vals.length;
while ($n > 0) {
$n--;
double $old = $vals[$n];
$vals[$n] = #0 + $factor * $old;
}
}",
    },
    Template {
        name: "lcm",
        literals: &[],
        main: "int $lcm(int $a, int $b) {
int $m = Math.max($a, $b);
@for ; $m % $a != 0 || $m % $b != 0; $m++
@end
return $m;
}",
        alt: "int $lcm(int $a, int $b) {
@swap int $x = $a;
@swap int $y = $b;
while ($y != 0) {
int $r = $x % $y;
$x = $y;
$y = $r;
}
return $a / $x * $b;
}",
    },
];
