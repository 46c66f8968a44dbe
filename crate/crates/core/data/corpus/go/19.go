func worker(id int, jobs <-chan int, results chan<- int) {
	for job := range jobs {
		log.Printf("worker %d processing job %d", id, job)
		results <- job * 2
	}
}
